#include "smartedge/ensemble.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>
#include <sstream>

#include "json_io.hpp"
#include "smartedge/error.hpp"
#include "smartedge/rng.hpp"

namespace smartedge {

std::string_view to_string(VotingMode mode) noexcept {
  return mode == VotingMode::Hard ? "hard" : "soft";
}

std::optional<VotingMode> parse_voting_mode(std::string_view text) {
  if (text == "hard") return VotingMode::Hard;
  if (text == "soft") return VotingMode::Soft;
  return std::nullopt;
}

void Ensemble::validate() const {
  if (members.size() < 2) {
    throw Error(ErrorCode::EmptyMemberList,
                "an ensemble needs at least 2 members, has " + std::to_string(members.size()));
  }
  const auto a = model_arity(members.front());
  for (const auto& m : members) {
    if (model_arity(m) != a) throw Error(ErrorCode::ArityMismatch, "members disagree on arity");
  }
}

std::size_t Ensemble::arity() const {
  return members.empty() ? 0 : model_arity(members.front());
}

namespace {

std::array<double, 2> ordered_sums(std::span<const std::array<double, 2>> probs) {
  std::array<double, 2> sums{};
  std::vector<double> column(probs.size());
  for (std::size_t k = 0; k < 2; ++k) {
    for (std::size_t i = 0; i < probs.size(); ++i) column[i] = probs[i][k];
    std::sort(column.begin(), column.end());
    sums[k] = std::accumulate(column.begin(), column.end(), 0.0);
  }
  return sums;
}

Prediction normalized_sums(std::span<const std::array<double, 2>> probs) {
  const auto sums = ordered_sums(probs);
  const auto n = static_cast<double>(probs.size());
  Prediction p;
  p.probs = {sums[0] / n, sums[1] / n};
  p.label = sums[1] > sums[0] ? 1 : 0;
  return p;
}

}  // namespace

Prediction hard_vote(std::span<const Label> labels, std::span<const std::array<double, 2>> probs) {
  if (labels.size() < 2) {
    throw Error(ErrorCode::EmptyMemberList, "hard voting needs at least 2 members");
  }
  if (probs.size() != labels.size()) {
    throw Error(ErrorCode::LengthMismatch, "labels and probability vectors differ in count");
  }
  const auto ones = static_cast<std::size_t>(std::count(labels.begin(), labels.end(), 1));
  const auto zeros = labels.size() - ones;
  if (ones == zeros) return normalized_sums(probs);
  const auto n = static_cast<double>(labels.size());
  Prediction p;
  p.probs = {static_cast<double>(zeros) / n, static_cast<double>(ones) / n};
  p.label = ones > zeros ? 1 : 0;
  return p;
}

Prediction soft_vote(std::span<const std::array<double, 2>> probs) {
  if (probs.size() < 2) {
    throw Error(ErrorCode::EmptyMemberList, "soft voting needs at least 2 members");
  }
  for (const auto& p : probs) {
    if (!(p[0] >= 0.0 && p[1] >= 0.0 && p[0] <= 1.0 && p[1] <= 1.0) ||
        std::abs(p[0] + p[1] - 1.0) > 1e-9) {
      throw Error(ErrorCode::UnnormalizedInput, "member probabilities must sum to 1");
    }
  }
  return normalized_sums(probs);
}

Prediction ensemble_predict(const Ensemble& e, std::span<const double> x) {
  e.validate();
  if (x.size() != e.arity()) {
    throw Error(ErrorCode::ArityMismatch, "ensemble expects " + std::to_string(e.arity()) +
                                              " features, got " + std::to_string(x.size()));
  }
  std::vector<Label> labels;
  std::vector<std::array<double, 2>> probs;
  labels.reserve(e.members.size());
  probs.reserve(e.members.size());
  for (const auto& m : e.members) {
    const auto p = predict(m, x);
    labels.push_back(p.label);
    probs.push_back(p.probs);
  }
  return e.mode == VotingMode::Hard ? hard_vote(labels, probs) : soft_vote(probs);
}

std::vector<Algorithm> parse_combo(std::string_view name) {
  std::vector<Algorithm> combo;
  std::size_t start = 0;
  while (start <= name.size()) {
    auto dash = name.find('-', start);
    if (dash == std::string_view::npos) dash = name.size();
    const auto tag = name.substr(start, dash - start);
    const auto a = parse_algorithm(tag);
    if (!a) {
      throw Error(ErrorCode::InvalidConfig, "unknown algorithm '" + std::string(tag) +
                                                "' in combo '" + std::string(name) +
                                                "' (known: lr, dt, rf, gb, svm)");
    }
    combo.push_back(*a);
    start = dash + 1;
  }
  return combo;
}

std::string combo_name(std::span<const Algorithm> combo) {
  std::string out;
  for (auto a : combo) {
    if (!out.empty()) out += '-';
    out += algorithm_tag(a);
  }
  return out;
}

std::vector<std::vector<std::size_t>> shard_indices(std::size_t count, std::size_t shards,
                                                    std::uint64_t seed) {
  if (shards == 0) throw Error(ErrorCode::EmptyMemberList, "no shards requested");
  std::vector<std::size_t> order(count);
  std::iota(order.begin(), order.end(), std::size_t{0});
  Rng rng(seed);
  rng.shuffle(std::span<std::size_t>(order));
  std::vector<std::vector<std::size_t>> out(shards);
  const std::size_t base = count / shards;
  const std::size_t extra = count % shards;
  auto it = order.begin();
  for (std::size_t s = 0; s < shards; ++s) {
    const std::size_t size = base + (s < extra ? 1 : 0);
    out[s].assign(it, it + static_cast<std::ptrdiff_t>(size));
    it += static_cast<std::ptrdiff_t>(size);
  }
  return out;
}

Ensemble train_sharded(std::span<const Algorithm> combo, const TrainingData& data,
                       const Hyperparams& hp, std::uint64_t seed, VotingMode mode) {
  if (combo.empty()) throw Error(ErrorCode::EmptyMemberList, "empty combo");
  if (data.train.x.rows() < 2 * combo.size()) {
    throw Error(ErrorCode::TooFewRecords, "sharded training needs at least 2 rows per member");
  }
  const auto shards = shard_indices(data.train.x.rows(), combo.size(), seed);
  Ensemble e;
  e.mode = mode;
  e.combo_name = combo_name(combo);
  for (std::size_t i = 0; i < combo.size(); ++i) {
    LabeledRows shard{data.train.x.select_rows(shards[i]), select_labels(data.train.y, shards[i])};
    e.members.push_back(train_model(combo[i], shard, data.validation, hp, derive_seed(seed, i)));
  }
  return e;
}

Ensemble train_whole(std::span<const Algorithm> combo, const TrainingData& data,
                     const Hyperparams& hp, std::uint64_t seed, VotingMode mode) {
  if (combo.empty()) throw Error(ErrorCode::EmptyMemberList, "empty combo");
  Ensemble e;
  e.mode = mode;
  e.combo_name = combo_name(combo);
  for (std::size_t i = 0; i < combo.size(); ++i) {
    e.members.push_back(train_model(combo[i], data.train, data.validation, hp, derive_seed(seed, i)));
  }
  return e;
}

// ---------------------------------------------------------------------------
// Bundle

Prediction ModelBundle::predict_raw(std::span<const double> raw_row) const {
  return ensemble_predict(ensemble, mask.apply(scaler.transform(raw_row)));
}

std::vector<Prediction> ModelBundle::predict_raw(const FeatureMatrix& raw_rows) const {
  std::vector<Prediction> out;
  out.reserve(raw_rows.rows());
  for (std::size_t r = 0; r < raw_rows.rows(); ++r) out.push_back(predict_raw(raw_rows.row(r)));
  return out;
}

std::string serialize_bundle(const ModelBundle& b) {
  nlohmann::json j = {
      {"kind", "model_bundle"},
      {"version", detail::kModelFormatVersion},
      {"ensemble", detail::ensemble_to_json(b.ensemble)},
      {"scaler", detail::scaler_to_json(b.scaler)},
      {"feature_mask", detail::mask_to_json(b.mask)},
      {"seed", b.seed},
      {"sharded", b.sharded},
      {"data_digest", b.data_digest},
      {"input_accuracy", b.input_accuracy},
      {"input_rows", b.input_rows},
  };
  return j.dump(1) + "\n";
}

ModelBundle deserialize_bundle(std::string_view text) {
  const auto j = detail::parse_json(text, ErrorCode::MalformedModel);
  try {
    if (j.at("kind").get<std::string>() != "model_bundle" ||
        j.at("version").get<int>() != detail::kModelFormatVersion) {
      throw Error(ErrorCode::MalformedModel, "not a version-1 model bundle");
    }
    ModelBundle b;
    b.ensemble = detail::ensemble_from_json(j.at("ensemble"));
    b.scaler = detail::scaler_from_json(j.at("scaler"));
    b.mask = detail::mask_from_json(j.at("feature_mask"));
    b.seed = j.at("seed").get<std::uint64_t>();
    b.sharded = j.at("sharded").get<bool>();
    b.data_digest = j.at("data_digest").get<std::string>();
    b.input_accuracy = j.at("input_accuracy").get<double>();
    b.input_rows = j.at("input_rows").get<std::size_t>();
    b.ensemble.validate();
    if (b.mask.selected.size() != b.ensemble.arity()) {
      throw Error(ErrorCode::MalformedModel, "feature mask does not match ensemble arity");
    }
    return b;
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::MalformedModel, e.what());
  }
}

void save_bundle(const ModelBundle& b, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error(ErrorCode::WriteFailure, path.string());
  out << serialize_bundle(b);
  if (!out) throw Error(ErrorCode::WriteFailure, path.string());
}

ModelBundle load_bundle(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::MissingFile, path.string());
  std::ostringstream buf;
  buf << in.rdbuf();
  return deserialize_bundle(buf.str());
}

}  // namespace smartedge
