#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "smartedge/dataset.hpp"
#include "smartedge/models.hpp"

namespace smartedge {

enum class VotingMode { Hard, Soft };

std::string_view to_string(VotingMode mode) noexcept;
std::optional<VotingMode> parse_voting_mode(std::string_view text);

struct Ensemble {
  std::vector<TrainedModel> members;
  VotingMode mode = VotingMode::Hard;
  std::string combo_name;

  // Throws EmptyMemberList below two members, ArityMismatch when members
  // disagree on feature count.
  void validate() const;
  std::size_t arity() const;
  friend bool operator==(const Ensemble&, const Ensemble&) = default;
};

// Majority label; output probs are vote shares. An exact tie falls back to
// the summed member probabilities (probs are then the normalized sums),
// and a tie there goes to class 0.
Prediction hard_vote(std::span<const Label> labels, std::span<const std::array<double, 2>> probs);

// Argmax of the per-class probability sums, ties to class 0; output probs
// are the sums divided by the member count. Sums are accumulated in sorted
// order so the result does not depend on member order.
Prediction soft_vote(std::span<const std::array<double, 2>> probs);

Prediction ensemble_predict(const Ensemble& e, std::span<const double> x);

// "svm-dt-lr" <-> {Svm, DecisionTree, LogReg}. Throws InvalidConfig.
std::vector<Algorithm> parse_combo(std::string_view name);
std::string combo_name(std::span<const Algorithm> combo);

struct TrainingData {
  LabeledRows train;
  LabeledRows validation;  // used to calibrate SVM members
};

// Shuffles 0..count-1 with Rng(seed) and cuts it into `shards` contiguous
// pieces whose sizes differ by at most one (larger pieces first).
std::vector<std::vector<std::size_t>> shard_indices(std::size_t count, std::size_t shards,
                                                    std::uint64_t seed);

// Member i trains on shard i with seed derive_seed(seed, i).
Ensemble train_sharded(std::span<const Algorithm> combo, const TrainingData& data,
                       const Hyperparams& hp, std::uint64_t seed,
                       VotingMode mode = VotingMode::Hard);

// Every member trains on the full training rows.
Ensemble train_whole(std::span<const Algorithm> combo, const TrainingData& data,
                     const Hyperparams& hp, std::uint64_t seed,
                     VotingMode mode = VotingMode::Hard);

std::string serialize_ensemble(const Ensemble& e);
Ensemble deserialize_ensemble(std::string_view text);

// Trained ensemble plus the preprocessing it expects, as written by
// `smartedge train` and loaded by workers.
struct ModelBundle {
  Ensemble ensemble;
  Scaler scaler;
  FeatureMask mask;
  std::uint64_t seed = 0;
  bool sharded = true;
  std::string data_digest;
  // Accuracy of this bundle over every row of the (preprocessed) training
  // input file.
  double input_accuracy = 0.0;
  std::size_t input_rows = 0;

  // Raw 8-feature row -> scaled, masked, voted.
  Prediction predict_raw(std::span<const double> raw_row) const;
  std::vector<Prediction> predict_raw(const FeatureMatrix& raw_rows) const;
};

std::string serialize_bundle(const ModelBundle& b);
ModelBundle deserialize_bundle(std::string_view text);
void save_bundle(const ModelBundle& b, const std::filesystem::path& path);
ModelBundle load_bundle(const std::filesystem::path& path);

}  // namespace smartedge
