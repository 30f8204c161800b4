#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <variant>
#include <vector>

#include "smartedge/matrix.hpp"

namespace smartedge {

// ---------------------------------------------------------------------------
// Hyperparameters

struct LogRegParams {
  double learning_rate = 0.1;
  int epochs = 500;
  double l2 = 1e-3;
  friend bool operator==(const LogRegParams&, const LogRegParams&) = default;
};

struct TreeParams {
  int max_depth = 5;
  int min_samples_split = 4;
  friend bool operator==(const TreeParams&, const TreeParams&) = default;
};

struct ForestParams {
  int n_trees = 100;
  int max_depth = 8;
  int features_per_split = 3;  // ceil(sqrt(8))
  int min_samples_split = 2;
  bool bootstrap = true;
  friend bool operator==(const ForestParams&, const ForestParams&) = default;
};

// Zero rounds or a zero learning rate give the prior-only model.
struct GradBoostParams {
  int n_rounds = 100;
  double learning_rate = 0.1;
  int max_depth = 3;
  friend bool operator==(const GradBoostParams&, const GradBoostParams&) = default;
};

struct SvmParams {
  double learning_rate = 0.01;
  int epochs = 500;
  double l2 = 1e-2;
  friend bool operator==(const SvmParams&, const SvmParams&) = default;
};

struct Hyperparams {
  LogRegParams logreg;
  TreeParams tree;
  ForestParams forest;
  GradBoostParams gbm;
  SvmParams svm;
  std::uint64_t seed = 0;

  // Throws InvalidConfig on a non-positive count or rate.
  void validate() const;
  friend bool operator==(const Hyperparams&, const Hyperparams&) = default;
};

// ---------------------------------------------------------------------------
// Trained models

struct LogRegModel {
  std::vector<double> weights;
  double bias = 0.0;
  friend bool operator==(const LogRegModel&, const LogRegModel&) = default;
};

// Internal nodes send x[feature] < threshold to `left`. Leaves have
// feature == -1 and carry the training class counts.
struct TreeNode {
  int feature = -1;
  double threshold = 0.0;
  int left = -1;
  int right = -1;
  std::array<std::uint64_t, 2> counts{};

  bool is_leaf() const noexcept { return feature < 0; }
  friend bool operator==(const TreeNode&, const TreeNode&) = default;
};

struct DecisionTreeModel {
  std::size_t arity = 0;
  std::vector<TreeNode> nodes;  // nodes[0] is the root
  friend bool operator==(const DecisionTreeModel&, const DecisionTreeModel&) = default;
};

struct RandomForestModel {
  std::vector<DecisionTreeModel> trees;
  std::uint64_t seed = 0;
  friend bool operator==(const RandomForestModel&, const RandomForestModel&) = default;
};

struct RegressionNode {
  int feature = -1;
  double threshold = 0.0;
  int left = -1;
  int right = -1;
  double value = 0.0;

  bool is_leaf() const noexcept { return feature < 0; }
  friend bool operator==(const RegressionNode&, const RegressionNode&) = default;
};

struct RegressionTree {
  std::vector<RegressionNode> nodes;
  double evaluate(std::span<const double> x) const;
  friend bool operator==(const RegressionTree&, const RegressionTree&) = default;
};

struct GradBoostModel {
  std::size_t arity = 0;
  double init_logit = 0.0;
  double learning_rate = 0.1;
  std::vector<RegressionTree> trees;
  friend bool operator==(const GradBoostModel&, const GradBoostModel&) = default;
};

// Class-1 probability is sigmoid(calib_a * margin + calib_b).
struct LinearSvmModel {
  std::vector<double> weights;
  double bias = 0.0;
  double calib_a = 1.0;
  double calib_b = 0.0;
  double margin(std::span<const double> x) const;
  friend bool operator==(const LinearSvmModel&, const LinearSvmModel&) = default;
};

using TrainedModel =
    std::variant<LogRegModel, DecisionTreeModel, RandomForestModel, GradBoostModel, LinearSvmModel>;

enum class Algorithm { LogReg, DecisionTree, RandomForest, GradBoost, Svm };

// Short tags used in combo names: lr, dt, rf, gb, svm.
std::string_view algorithm_tag(Algorithm a) noexcept;
std::optional<Algorithm> parse_algorithm(std::string_view tag);
Algorithm algorithm_of(const TrainedModel& m) noexcept;
std::size_t model_arity(const TrainedModel& m);

// ---------------------------------------------------------------------------
// Prediction and metrics

struct Prediction {
  Label label = 0;
  std::array<double, 2> probs{0.5, 0.5};

  // Label is the argmax; an exact tie goes to class 0.
  static Prediction from_positive(double p1);
  static Prediction from_probs(std::array<double, 2> probs);
  friend bool operator==(const Prediction&, const Prediction&) = default;
};

struct Confusion {
  std::size_t tp = 0, fp = 0, tn = 0, fn = 0;
  friend bool operator==(const Confusion&, const Confusion&) = default;
};

struct RocPoint {
  double fpr = 0.0;
  double tpr = 0.0;
};

struct EvalReport {
  double accuracy = 0.0;
  double precision = 0.0;
  double recall = 0.0;
  double f_measure = 0.0;
  double auc = 0.0;
  Confusion confusion;
  std::vector<RocPoint> roc_points;
};

// Class 1 is the positive class. AUC is the Mann-Whitney statistic over
// probs[1] with ties counted half; it is 0.5 when a class is absent.
EvalReport evaluate(std::span<const Prediction> predictions, const Labels& y_true);

double auc_rank(std::span<const double> scores, const Labels& y_true);
double auc_trapezoid(std::span<const RocPoint> roc);
std::vector<RocPoint> roc_curve(std::span<const double> scores, const Labels& y_true);

// ---------------------------------------------------------------------------
// Training

double sigmoid(double z) noexcept;

// Mean log-loss plus (l2/2)|w|^2; the bias is not penalized.
double logreg_objective(const LogRegModel& m, const FeatureMatrix& x, const Labels& y, double l2);
LogRegModel logreg_gradient(const LogRegModel& m, const FeatureMatrix& x, const Labels& y,
                            double l2);

// (l2/2)|w|^2 plus mean hinge loss with labels mapped to +-1.
double svm_objective(const LinearSvmModel& m, const FeatureMatrix& x, const Labels& y, double l2);

// Full-batch descent. A step that would raise the objective is halved
// until it does not, so `loss_trace` (epochs + 1 values) never increases.
LogRegModel train_logreg(const FeatureMatrix& x, const Labels& y, const LogRegParams& hp,
                         std::vector<double>* loss_trace = nullptr);

DecisionTreeModel train_tree(const FeatureMatrix& x, const Labels& y, const TreeParams& hp);

RandomForestModel train_forest(const FeatureMatrix& x, const Labels& y, const ForestParams& hp,
                               std::uint64_t seed);

GradBoostModel train_gbm(const FeatureMatrix& x, const Labels& y, const GradBoostParams& hp);

// Calibration uses (calib_x, calib_y) when both classes are present there,
// otherwise the training rows.
LinearSvmModel train_svm(const FeatureMatrix& x, const Labels& y, const SvmParams& hp,
                         const FeatureMatrix& calib_x, const Labels& calib_y,
                         std::vector<double>* loss_trace = nullptr);

// Platt scaling: (a, b) minimizing the log-loss of sigmoid(a*m + b).
std::pair<double, double> fit_platt(std::span<const double> margins, const Labels& y);

struct LabeledRows {
  FeatureMatrix x;
  Labels y;
};

TrainedModel train_model(Algorithm algorithm, const LabeledRows& train,
                         const LabeledRows& calibration, const Hyperparams& hp,
                         std::uint64_t seed);

Prediction predict(const TrainedModel& m, std::span<const double> x);
std::vector<Prediction> predict_all(const TrainedModel& m, const FeatureMatrix& x);

// Single-tree helpers shared with the forest.
std::array<double, 2> tree_probs(const DecisionTreeModel& t, std::span<const double> x);

// Versioned JSON document with a `kind` tag. Doubles are written in
// shortest round-trip form, so deserialize(serialize(m)) == m.
std::string serialize_model(const TrainedModel& m);
TrainedModel deserialize_model(std::string_view text);

}  // namespace smartedge
