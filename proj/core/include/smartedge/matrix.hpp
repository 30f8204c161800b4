#pragma once

#include <cstddef>
#include <span>
#include <vector>

namespace smartedge {

using Label = int;
using Labels = std::vector<Label>;

// Dense row-major feature matrix.
class FeatureMatrix {
 public:
  FeatureMatrix() = default;
  FeatureMatrix(std::size_t rows, std::size_t cols)
      : rows_(rows), cols_(cols), values_(rows * cols, 0.0) {}

  std::size_t rows() const noexcept { return rows_; }
  std::size_t cols() const noexcept { return cols_; }
  bool empty() const noexcept { return rows_ == 0; }

  std::span<const double> row(std::size_t r) const {
    return {values_.data() + r * cols_, cols_};
  }
  std::span<double> row(std::size_t r) { return {values_.data() + r * cols_, cols_}; }

  double operator()(std::size_t r, std::size_t c) const { return values_[r * cols_ + c]; }
  double& operator()(std::size_t r, std::size_t c) { return values_[r * cols_ + c]; }

  const std::vector<double>& values() const noexcept { return values_; }

  void append_row(std::span<const double> row);

  // Rows at `indices` in the given order (duplicates allowed).
  FeatureMatrix select_rows(std::span<const std::size_t> indices) const;
  FeatureMatrix select_cols(std::span<const std::size_t> columns) const;

  friend bool operator==(const FeatureMatrix&, const FeatureMatrix&) = default;

 private:
  std::size_t rows_ = 0;
  std::size_t cols_ = 0;
  std::vector<double> values_;
};

Labels select_labels(const Labels& labels, std::span<const std::size_t> indices);

}  // namespace smartedge
