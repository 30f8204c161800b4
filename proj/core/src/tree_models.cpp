#include <algorithm>
#include <cmath>
#include <numeric>

#include "smartedge/error.hpp"
#include "smartedge/models.hpp"
#include "smartedge/rng.hpp"
#include "training_checks.hpp"

namespace smartedge {

namespace {

// Candidate splits must beat the incumbent by this much; near-ties keep
// the earliest (feature, threshold) in scan order.
constexpr double kSplitEpsilon = 1e-12;

double midpoint(double lo, double hi) {
  const double mid = lo + (hi - lo) / 2.0;
  return mid > lo ? mid : hi;
}

struct SplitChoice {
  int feature = -1;
  double threshold = 0.0;
};

// Features to scan at one node: all of them in order, or a sorted random
// subset of `per_split` when that is smaller than the arity.
std::vector<std::size_t> candidate_features(std::size_t arity, int per_split, Rng* rng) {
  std::vector<std::size_t> features(arity);
  std::iota(features.begin(), features.end(), std::size_t{0});
  if (rng == nullptr || per_split <= 0 || static_cast<std::size_t>(per_split) >= arity) {
    return features;
  }
  const auto k = static_cast<std::size_t>(per_split);
  for (std::size_t i = 0; i < k; ++i) {
    const auto j = i + static_cast<std::size_t>(rng->uniform_index(arity - i));
    std::swap(features[i], features[j]);
  }
  features.resize(k);
  std::sort(features.begin(), features.end());
  return features;
}

class ClassificationTreeBuilder {
 public:
  ClassificationTreeBuilder(const FeatureMatrix& x, const Labels& y, int max_depth,
                            int min_samples_split, int features_per_split, Rng* rng)
      : x_(x),
        y_(y),
        max_depth_(max_depth),
        min_samples_split_(min_samples_split),
        features_per_split_(features_per_split),
        rng_(rng) {}

  DecisionTreeModel build(std::vector<std::size_t> rows) {
    DecisionTreeModel tree;
    tree.arity = x_.cols();
    nodes_.clear();
    grow(std::move(rows), 0);
    tree.nodes = std::move(nodes_);
    return tree;
  }

 private:
  static double gini_sum(double c0, double c1) {
    const double n = c0 + c1;
    return n > 0 ? n - (c0 * c0 + c1 * c1) / n : 0.0;
  }

  SplitChoice best_split(const std::vector<std::size_t>& rows, double c0, double c1) {
    const double n = c0 + c1;
    double best = gini_sum(c0, c1) / n - kSplitEpsilon;
    SplitChoice choice;
    std::vector<std::pair<double, Label>> column(rows.size());
    for (auto f : candidate_features(x_.cols(), features_per_split_, rng_)) {
      for (std::size_t i = 0; i < rows.size(); ++i) column[i] = {x_(rows[i], f), y_[rows[i]]};
      std::sort(column.begin(), column.end(),
                [](const auto& a, const auto& b) { return a.first < b.first; });
      double l0 = 0, l1 = 0;
      for (std::size_t i = 0; i + 1 < column.size(); ++i) {
        (column[i].second == 1 ? l1 : l0) += 1;
        if (!(column[i].first < column[i + 1].first)) continue;
        const double score = (gini_sum(l0, l1) + gini_sum(c0 - l0, c1 - l1)) / n;
        if (score < best) {
          best = score - kSplitEpsilon;
          choice.feature = static_cast<int>(f);
          choice.threshold = midpoint(column[i].first, column[i + 1].first);
        }
      }
    }
    return choice;
  }

  int grow(std::vector<std::size_t> rows, int depth) {
    const int index = static_cast<int>(nodes_.size());
    nodes_.emplace_back();
    std::uint64_t c0 = 0, c1 = 0;
    for (auto r : rows) (y_[r] == 1 ? c1 : c0) += 1;
    nodes_[index].counts = {c0, c1};

    const bool can_split = depth < max_depth_ && c0 > 0 && c1 > 0 &&
                           rows.size() >= static_cast<std::size_t>(min_samples_split_);
    if (!can_split) return index;
    const auto choice = best_split(rows, static_cast<double>(c0), static_cast<double>(c1));
    if (choice.feature < 0) return index;

    std::vector<std::size_t> left, right;
    for (auto r : rows) {
      (x_(r, static_cast<std::size_t>(choice.feature)) < choice.threshold ? left : right)
          .push_back(r);
    }
    rows.clear();
    rows.shrink_to_fit();
    nodes_[index].feature = choice.feature;
    nodes_[index].threshold = choice.threshold;
    const int l = grow(std::move(left), depth + 1);
    nodes_[index].left = l;
    const int r = grow(std::move(right), depth + 1);
    nodes_[index].right = r;
    return index;
  }

  const FeatureMatrix& x_;
  const Labels& y_;
  int max_depth_;
  int min_samples_split_;
  int features_per_split_;
  Rng* rng_;
  std::vector<TreeNode> nodes_;
};

// Least-squares tree on gradient residuals; leaf values are Newton steps
// sum(residual) / sum(p (1 - p)).
class RegressionTreeBuilder {
 public:
  RegressionTreeBuilder(const FeatureMatrix& x, const std::vector<double>& residual,
                        const std::vector<double>& hessian, int max_depth)
      : x_(x), residual_(residual), hessian_(hessian), max_depth_(max_depth) {}

  RegressionTree build() {
    std::vector<std::size_t> rows(x_.rows());
    std::iota(rows.begin(), rows.end(), std::size_t{0});
    nodes_.clear();
    grow(std::move(rows), 0);
    return RegressionTree{std::move(nodes_)};
  }

 private:
  int grow(std::vector<std::size_t> rows, int depth) {
    const int index = static_cast<int>(nodes_.size());
    nodes_.emplace_back();
    double sum_r = 0.0, sum_h = 0.0;
    for (auto r : rows) {
      sum_r += residual_[r];
      sum_h += hessian_[r];
    }
    nodes_[index].value = sum_r / std::max(sum_h, 1e-12);
    if (depth >= max_depth_ || rows.size() < 2) return index;

    const double n = static_cast<double>(rows.size());
    const double parent = sum_r * sum_r / n;
    double best = parent + kSplitEpsilon;
    SplitChoice choice;
    std::vector<std::pair<double, double>> column(rows.size());
    for (std::size_t f = 0; f < x_.cols(); ++f) {
      for (std::size_t i = 0; i < rows.size(); ++i) column[i] = {x_(rows[i], f), residual_[rows[i]]};
      std::sort(column.begin(), column.end(),
                [](const auto& a, const auto& b) { return a.first < b.first; });
      double left_sum = 0.0;
      for (std::size_t i = 0; i + 1 < column.size(); ++i) {
        left_sum += column[i].second;
        if (!(column[i].first < column[i + 1].first)) continue;
        const double nl = static_cast<double>(i + 1);
        const double right_sum = sum_r - left_sum;
        const double score = left_sum * left_sum / nl + right_sum * right_sum / (n - nl);
        if (score > best) {
          best = score + kSplitEpsilon;
          choice.feature = static_cast<int>(f);
          choice.threshold = midpoint(column[i].first, column[i + 1].first);
        }
      }
    }
    if (choice.feature < 0) return index;

    std::vector<std::size_t> left, right;
    for (auto r : rows) {
      (x_(r, static_cast<std::size_t>(choice.feature)) < choice.threshold ? left : right)
          .push_back(r);
    }
    nodes_[index].feature = choice.feature;
    nodes_[index].threshold = choice.threshold;
    const int l = grow(std::move(left), depth + 1);
    nodes_[index].left = l;
    const int r = grow(std::move(right), depth + 1);
    nodes_[index].right = r;
    return index;
  }

  const FeatureMatrix& x_;
  const std::vector<double>& residual_;
  const std::vector<double>& hessian_;
  int max_depth_;
  std::vector<RegressionNode> nodes_;
};

std::vector<std::size_t> all_rows(std::size_t n) {
  std::vector<std::size_t> rows(n);
  std::iota(rows.begin(), rows.end(), std::size_t{0});
  return rows;
}

}  // namespace

DecisionTreeModel train_tree(const FeatureMatrix& x, const Labels& y, const TreeParams& hp) {
  detail::check_training_input(x, y);
  ClassificationTreeBuilder builder(x, y, hp.max_depth, hp.min_samples_split, 0, nullptr);
  return builder.build(all_rows(x.rows()));
}

RandomForestModel train_forest(const FeatureMatrix& x, const Labels& y, const ForestParams& hp,
                               std::uint64_t seed) {
  detail::check_training_input(x, y);
  RandomForestModel forest;
  forest.seed = seed;
  forest.trees.reserve(static_cast<std::size_t>(hp.n_trees));
  const std::size_t n = x.rows();
  for (int t = 0; t < hp.n_trees; ++t) {
    // Each tree owns a stream derived from (seed, tree index), so tree
    // order of construction does not affect the result.
    Rng rng(derive_seed(seed, static_cast<std::uint64_t>(t)));
    std::vector<std::size_t> rows;
    if (hp.bootstrap) {
      rows.reserve(n);
      for (std::size_t i = 0; i < n; ++i) rows.push_back(static_cast<std::size_t>(rng.uniform_index(n)));
    } else {
      rows = all_rows(n);
    }
    ClassificationTreeBuilder builder(x, y, hp.max_depth, hp.min_samples_split,
                                      hp.features_per_split, &rng);
    forest.trees.push_back(builder.build(std::move(rows)));
  }
  return forest;
}

double RegressionTree::evaluate(std::span<const double> x) const {
  std::size_t i = 0;
  while (!nodes[i].is_leaf()) {
    const auto& node = nodes[i];
    i = static_cast<std::size_t>(x[static_cast<std::size_t>(node.feature)] < node.threshold
                                     ? node.left
                                     : node.right);
  }
  return nodes[i].value;
}

GradBoostModel train_gbm(const FeatureMatrix& x, const Labels& y, const GradBoostParams& hp) {
  detail::check_training_input(x, y);
  const std::size_t n = x.rows();
  double positives = 0.0;
  for (auto v : y) positives += v;

  GradBoostModel model;
  model.arity = x.cols();
  model.learning_rate = hp.learning_rate;
  model.init_logit = std::log(positives / (static_cast<double>(n) - positives));
  if (hp.learning_rate == 0.0) return model;

  std::vector<double> logit(n, model.init_logit);
  std::vector<double> residual(n), hessian(n);
  for (int round = 0; round < hp.n_rounds; ++round) {
    for (std::size_t i = 0; i < n; ++i) {
      const double p = sigmoid(logit[i]);
      residual[i] = static_cast<double>(y[i]) - p;
      hessian[i] = p * (1.0 - p);
    }
    RegressionTreeBuilder builder(x, residual, hessian, hp.max_depth);
    model.trees.push_back(builder.build());
    const auto& tree = model.trees.back();
    for (std::size_t i = 0; i < n; ++i) logit[i] += hp.learning_rate * tree.evaluate(x.row(i));
  }
  return model;
}

std::array<double, 2> tree_probs(const DecisionTreeModel& t, std::span<const double> x) {
  std::size_t i = 0;
  while (!t.nodes[i].is_leaf()) {
    const auto& node = t.nodes[i];
    i = static_cast<std::size_t>(x[static_cast<std::size_t>(node.feature)] < node.threshold
                                     ? node.left
                                     : node.right);
  }
  const auto& counts = t.nodes[i].counts;
  const double total = static_cast<double>(counts[0] + counts[1]);
  if (total == 0.0) return {0.5, 0.5};
  const double p1 = static_cast<double>(counts[1]) / total;
  return {1.0 - p1, p1};
}

}  // namespace smartedge
