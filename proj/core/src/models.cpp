#include "smartedge/models.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "smartedge/error.hpp"

namespace smartedge {

namespace {

template <class... Ts>
struct Overloaded : Ts... {
  using Ts::operator()...;
};
template <class... Ts>
Overloaded(Ts...) -> Overloaded<Ts...>;

void require_positive(bool ok, const char* what) {
  if (!ok) throw Error(ErrorCode::InvalidConfig, what);
}

}  // namespace

void Hyperparams::validate() const {
  require_positive(logreg.learning_rate > 0 && logreg.epochs >= 1 && logreg.l2 >= 0,
                   "logreg: learning_rate > 0, epochs >= 1, l2 >= 0");
  require_positive(tree.max_depth >= 1 && tree.min_samples_split >= 1,
                   "tree: max_depth >= 1, min_samples_split >= 1");
  require_positive(forest.n_trees >= 1 && forest.max_depth >= 1 &&
                       forest.features_per_split >= 1 && forest.min_samples_split >= 1,
                   "forest: n_trees, max_depth, features_per_split, min_samples_split >= 1");
  require_positive(gbm.n_rounds >= 0 && gbm.learning_rate >= 0 && gbm.max_depth >= 1,
                   "gbm: n_rounds >= 0, learning_rate >= 0, max_depth >= 1");
  require_positive(svm.learning_rate > 0 && svm.epochs >= 1 && svm.l2 >= 0,
                   "svm: learning_rate > 0, epochs >= 1, l2 >= 0");
}

std::string_view algorithm_tag(Algorithm a) noexcept {
  switch (a) {
    case Algorithm::LogReg: return "lr";
    case Algorithm::DecisionTree: return "dt";
    case Algorithm::RandomForest: return "rf";
    case Algorithm::GradBoost: return "gb";
    case Algorithm::Svm: return "svm";
  }
  return "?";
}

std::optional<Algorithm> parse_algorithm(std::string_view tag) {
  for (auto a : {Algorithm::LogReg, Algorithm::DecisionTree, Algorithm::RandomForest,
                 Algorithm::GradBoost, Algorithm::Svm}) {
    if (tag == algorithm_tag(a)) return a;
  }
  return std::nullopt;
}

Algorithm algorithm_of(const TrainedModel& m) noexcept {
  return std::visit(Overloaded{
                        [](const LogRegModel&) { return Algorithm::LogReg; },
                        [](const DecisionTreeModel&) { return Algorithm::DecisionTree; },
                        [](const RandomForestModel&) { return Algorithm::RandomForest; },
                        [](const GradBoostModel&) { return Algorithm::GradBoost; },
                        [](const LinearSvmModel&) { return Algorithm::Svm; },
                    },
                    m);
}

std::size_t model_arity(const TrainedModel& m) {
  return std::visit(Overloaded{
                        [](const LogRegModel& lr) { return lr.weights.size(); },
                        [](const DecisionTreeModel& t) { return t.arity; },
                        [](const RandomForestModel& f) {
                          return f.trees.empty() ? std::size_t{0} : f.trees.front().arity;
                        },
                        [](const GradBoostModel& g) { return g.arity; },
                        [](const LinearSvmModel& s) { return s.weights.size(); },
                    },
                    m);
}

Prediction Prediction::from_positive(double p1) {
  p1 = std::clamp(p1, 0.0, 1.0);
  return from_probs({1.0 - p1, p1});
}

Prediction Prediction::from_probs(std::array<double, 2> probs) {
  Prediction p;
  p.probs = probs;
  p.label = probs[1] > probs[0] ? 1 : 0;
  return p;
}

TrainedModel train_model(Algorithm algorithm, const LabeledRows& train,
                         const LabeledRows& calibration, const Hyperparams& hp,
                         std::uint64_t seed) {
  switch (algorithm) {
    case Algorithm::LogReg: return train_logreg(train.x, train.y, hp.logreg);
    case Algorithm::DecisionTree: return train_tree(train.x, train.y, hp.tree);
    case Algorithm::RandomForest: return train_forest(train.x, train.y, hp.forest, seed);
    case Algorithm::GradBoost: return train_gbm(train.x, train.y, hp.gbm);
    case Algorithm::Svm:
      return train_svm(train.x, train.y, hp.svm, calibration.x, calibration.y);
  }
  throw Error(ErrorCode::InvalidConfig, "unknown algorithm");
}

Prediction predict(const TrainedModel& m, std::span<const double> x) {
  const auto arity = model_arity(m);
  if (x.size() != arity) {
    throw Error(ErrorCode::ArityMismatch, "model expects " + std::to_string(arity) +
                                              " features, got " + std::to_string(x.size()));
  }
  return std::visit(
      Overloaded{
          [&](const LogRegModel& lr) {
            double z = lr.bias;
            for (std::size_t i = 0; i < x.size(); ++i) z += lr.weights[i] * x[i];
            return Prediction::from_positive(sigmoid(z));
          },
          [&](const DecisionTreeModel& t) { return Prediction::from_probs(tree_probs(t, x)); },
          [&](const RandomForestModel& f) {
            double p1 = 0.0;
            for (const auto& t : f.trees) p1 += tree_probs(t, x)[1];
            return Prediction::from_positive(p1 / static_cast<double>(f.trees.size()));
          },
          [&](const GradBoostModel& g) {
            double z = 0.0;
            for (const auto& t : g.trees) z += t.evaluate(x);
            return Prediction::from_positive(sigmoid(g.init_logit + g.learning_rate * z));
          },
          [&](const LinearSvmModel& s) {
            return Prediction::from_positive(sigmoid(s.calib_a * s.margin(x) + s.calib_b));
          },
      },
      m);
}

std::vector<Prediction> predict_all(const TrainedModel& m, const FeatureMatrix& x) {
  std::vector<Prediction> out;
  out.reserve(x.rows());
  for (std::size_t r = 0; r < x.rows(); ++r) out.push_back(predict(m, x.row(r)));
  return out;
}

// ---------------------------------------------------------------------------
// Metrics

double auc_rank(std::span<const double> scores, const Labels& y_true) {
  if (scores.size() != y_true.size()) {
    throw Error(ErrorCode::LengthMismatch, "scores and labels differ in length");
  }
  // Average ranks over tie groups; U = sum of positive ranks - n1(n1+1)/2.
  std::vector<std::size_t> order(scores.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::sort(order.begin(), order.end(), [&](auto a, auto b) { return scores[a] < scores[b]; });
  double n_pos = 0, rank_sum = 0;
  for (std::size_t i = 0; i < order.size();) {
    std::size_t j = i;
    while (j < order.size() && scores[order[j]] == scores[order[i]]) ++j;
    const double avg_rank = (static_cast<double>(i + 1) + static_cast<double>(j)) / 2.0;
    for (std::size_t k = i; k < j; ++k) {
      if (y_true[order[k]] == 1) {
        n_pos += 1;
        rank_sum += avg_rank;
      }
    }
    i = j;
  }
  const double n_neg = static_cast<double>(scores.size()) - n_pos;
  if (n_pos == 0 || n_neg == 0) return 0.5;
  return (rank_sum - n_pos * (n_pos + 1) / 2.0) / (n_pos * n_neg);
}

std::vector<RocPoint> roc_curve(std::span<const double> scores, const Labels& y_true) {
  if (scores.size() != y_true.size()) {
    throw Error(ErrorCode::LengthMismatch, "scores and labels differ in length");
  }
  double n_pos = 0;
  for (auto v : y_true) n_pos += v;
  const double n_neg = static_cast<double>(y_true.size()) - n_pos;
  std::vector<RocPoint> roc{{0.0, 0.0}};
  if (n_pos == 0 || n_neg == 0) {
    roc.push_back({1.0, 1.0});
    return roc;
  }
  std::vector<std::size_t> order(scores.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::sort(order.begin(), order.end(), [&](auto a, auto b) { return scores[a] > scores[b]; });
  double tp = 0, fp = 0;
  for (std::size_t i = 0; i < order.size();) {
    std::size_t j = i;
    while (j < order.size() && scores[order[j]] == scores[order[i]]) {
      (y_true[order[j]] == 1 ? tp : fp) += 1;
      ++j;
    }
    roc.push_back({fp / n_neg, tp / n_pos});
    i = j;
  }
  return roc;
}

double auc_trapezoid(std::span<const RocPoint> roc) {
  double area = 0.0;
  for (std::size_t i = 1; i < roc.size(); ++i) {
    area += (roc[i].fpr - roc[i - 1].fpr) * (roc[i].tpr + roc[i - 1].tpr) / 2.0;
  }
  return area;
}

EvalReport evaluate(std::span<const Prediction> predictions, const Labels& y_true) {
  if (predictions.size() != y_true.size()) {
    throw Error(ErrorCode::LengthMismatch, std::to_string(predictions.size()) +
                                               " predictions for " +
                                               std::to_string(y_true.size()) + " labels");
  }
  if (predictions.empty()) throw Error(ErrorCode::LengthMismatch, "no predictions");

  EvalReport report;
  auto& c = report.confusion;
  std::vector<double> scores;
  scores.reserve(predictions.size());
  for (std::size_t i = 0; i < predictions.size(); ++i) {
    const bool predicted = predictions[i].label == 1;
    const bool actual = y_true[i] == 1;
    if (predicted && actual) ++c.tp;
    else if (predicted) ++c.fp;
    else if (actual) ++c.fn;
    else ++c.tn;
    scores.push_back(predictions[i].probs[1]);
  }
  const auto total = static_cast<double>(predictions.size());
  report.accuracy = static_cast<double>(c.tp + c.tn) / total;
  report.precision = c.tp + c.fp ? static_cast<double>(c.tp) / static_cast<double>(c.tp + c.fp) : 0.0;
  report.recall = c.tp + c.fn ? static_cast<double>(c.tp) / static_cast<double>(c.tp + c.fn) : 0.0;
  const double pr = report.precision + report.recall;
  report.f_measure = pr > 0 ? 2.0 * report.precision * report.recall / pr : 0.0;
  report.auc = auc_rank(scores, y_true);
  report.roc_points = roc_curve(scores, y_true);
  return report;
}

}  // namespace smartedge
