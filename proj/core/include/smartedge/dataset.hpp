#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "smartedge/matrix.hpp"

namespace smartedge {

inline constexpr std::size_t kFeatureCount = 8;

// Column order of the Pima CSV.
enum class Feature : std::size_t {
  Pregnancies,
  Glucose,
  DiastolicBp,
  Skinfold,
  Insulin,
  Bmi,
  Pedigree,
  Age,
};

// Header names, in column order; the ninth column is the label.
const std::array<std::string_view, kFeatureCount>& feature_names();
inline constexpr std::string_view kOutcomeColumn = "Outcome";

// Resolves a CSV header name ("SkinThickness") or a snake_case alias
// ("skinfold") to a column index.
std::optional<std::size_t> find_feature(std::string_view name);

struct PatientRecord {
  std::array<double, kFeatureCount> features{};
  Label outcome = 0;

  double operator[](Feature f) const { return features[static_cast<std::size_t>(f)]; }
  double& operator[](Feature f) { return features[static_cast<std::size_t>(f)]; }

  friend bool operator==(const PatientRecord&, const PatientRecord&) = default;
};

struct Dataset {
  std::vector<PatientRecord> records;
  std::vector<std::string> feature_names;
  std::string source_digest;  // SHA-256 of the input bytes, hex

  std::size_t size() const noexcept { return records.size(); }
  std::size_t count_label(Label label) const;
  FeatureMatrix features() const;
  Labels labels() const;
};

Dataset load_csv(const std::filesystem::path& path);
Dataset parse_csv(std::string_view text);

// Same schema as the input: header plus one line per record, values in
// shortest round-trip form.
std::string to_csv(const Dataset& ds);
void write_csv(const Dataset& ds, const std::filesystem::path& path);

// Feature rows for inference. The header decides the shape: 8 feature
// columns, or the full 9-column schema (labels are then kept). Zero data
// rows is valid here.
struct FeatureTable {
  FeatureMatrix features;
  std::optional<Labels> labels;
};
FeatureTable parse_feature_csv(std::string_view text);
std::string to_feature_csv(const FeatureMatrix& rows);

// Preprocessed rows of any width, written at full precision. Columns are
// x0..x{k-1}, plus a trailing Outcome column when labels are given.
std::string to_matrix_csv(const FeatureMatrix& rows, const Labels* labels = nullptr);
FeatureTable parse_matrix_csv(std::string_view text);

// Columns whose zero values mark a missing measurement.
std::vector<std::string> default_missing_columns();

// Keeps records with no zero in any of `columns`, order preserved.
Dataset drop_missing(const Dataset& ds, const std::vector<std::string>& columns);
inline Dataset drop_missing(const Dataset& ds) {
  return drop_missing(ds, default_missing_columns());
}

struct SplitRatios {
  double train = 0.7;
  double validation = 0.1;
  double test = 0.2;
};

struct SplitDataset {
  std::vector<std::size_t> train_idx;
  std::vector<std::size_t> val_idx;
  std::vector<std::size_t> test_idx;
  std::uint64_t seed = 0;
};

// Shuffled indices: train takes floor(train*n), validation floor(validation*n),
// test the remainder.
SplitDataset split(std::size_t record_count, SplitRatios ratios, std::uint64_t seed);
inline SplitDataset split(const Dataset& ds, SplitRatios ratios, std::uint64_t seed) {
  return split(ds.size(), ratios, seed);
}

// z-score standardization. Features with std below 1e-12 keep std = 1 and
// therefore map to zero.
struct Scaler {
  std::vector<double> mean;
  std::vector<double> stddev;

  std::size_t arity() const noexcept { return mean.size(); }
  std::vector<double> transform(std::span<const double> row) const;
  friend bool operator==(const Scaler&, const Scaler&) = default;
};

Scaler fit_scaler(const FeatureMatrix& x, std::span<const std::size_t> idx);
inline Scaler fit_scaler(const Dataset& ds, std::span<const std::size_t> idx) {
  return fit_scaler(ds.features(), idx);
}
FeatureMatrix apply_scaler(const Scaler& scaler, const FeatureMatrix& x);

struct FeatureMask {
  std::vector<std::size_t> selected;           // ascending
  std::vector<std::size_t> elimination_order;  // first dropped first

  static FeatureMask all(std::size_t arity = kFeatureCount);
  FeatureMatrix apply(const FeatureMatrix& x) const;
  std::vector<double> apply(std::span<const double> row) const;
  friend bool operator==(const FeatureMask&, const FeatureMask&) = default;
};

// Recursive feature elimination with a logistic-regression ranker on
// standardized training rows: drop the smallest |weight| until `target_k`
// features remain.
FeatureMask rfe(const FeatureMatrix& x, const Labels& y, std::span<const std::size_t> train_idx,
                std::size_t target_k, std::uint64_t seed);
inline FeatureMask rfe(const Dataset& ds, std::span<const std::size_t> train_idx,
                       std::size_t target_k, std::uint64_t seed) {
  return rfe(ds.features(), ds.labels(), train_idx, target_k, seed);
}

// Shortest decimal text that parses back to the same double.
std::string format_double(double value);

}  // namespace smartedge
