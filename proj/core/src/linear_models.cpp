#include <algorithm>
#include <cmath>
#include <string>
#include <tuple>

#include "smartedge/error.hpp"
#include "smartedge/models.hpp"
#include "training_checks.hpp"

namespace smartedge {

namespace {

constexpr int kMaxStepHalvings = 30;

double dot(std::span<const double> a, std::span<const double> b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
  return s;
}

double squared_norm(const std::vector<double>& w) {
  double s = 0.0;
  for (double v : w) s += v * v;
  return s;
}

// log(1 + exp(z)) without overflow.
double softplus(double z) {
  return z > 0 ? z + std::log1p(std::exp(-z)) : std::log1p(std::exp(z));
}

template <typename Model>
Model step(const Model& m, const Model& grad, double rate) {
  Model out = m;
  for (std::size_t i = 0; i < out.weights.size(); ++i) out.weights[i] -= rate * grad.weights[i];
  out.bias -= rate * grad.bias;
  return out;
}

// Descent with step halving: a trial step that raises the objective is
// shrunk, and if no shrink helps the iterate stays put.
template <typename Model, typename Objective, typename Gradient>
Model descend(Model m, double rate, int epochs, Objective objective, Gradient gradient,
              std::vector<double>* trace) {
  double current = objective(m);
  if (trace) {
    trace->clear();
    trace->push_back(current);
  }
  for (int epoch = 0; epoch < epochs; ++epoch) {
    const Model grad = gradient(m);
    double r = rate;
    for (int h = 0; h <= kMaxStepHalvings; ++h, r *= 0.5) {
      Model trial = step(m, grad, r);
      const double value = objective(trial);
      if (value <= current) {
        m = std::move(trial);
        current = value;
        break;
      }
    }
    if (trace) trace->push_back(current);
  }
  return m;
}

}  // namespace

double sigmoid(double z) noexcept {
  if (z >= 0) return 1.0 / (1.0 + std::exp(-z));
  const double e = std::exp(z);
  return e / (1.0 + e);
}

double logreg_objective(const LogRegModel& m, const FeatureMatrix& x, const Labels& y,
                        double l2) {
  double loss = 0.0;
  for (std::size_t r = 0; r < x.rows(); ++r) {
    const double z = dot(m.weights, x.row(r)) + m.bias;
    // -[y log s(z) + (1-y) log(1-s(z))] = softplus(z) - y z
    loss += softplus(z) - (y[r] == 1 ? z : 0.0);
  }
  return loss / static_cast<double>(x.rows()) + 0.5 * l2 * squared_norm(m.weights);
}

LogRegModel logreg_gradient(const LogRegModel& m, const FeatureMatrix& x, const Labels& y,
                            double l2) {
  LogRegModel g;
  g.weights.assign(m.weights.size(), 0.0);
  const double inv_n = 1.0 / static_cast<double>(x.rows());
  for (std::size_t r = 0; r < x.rows(); ++r) {
    const auto row = x.row(r);
    const double err = sigmoid(dot(m.weights, row) + m.bias) - static_cast<double>(y[r]);
    for (std::size_t c = 0; c < row.size(); ++c) g.weights[c] += err * row[c];
    g.bias += err;
  }
  for (std::size_t c = 0; c < g.weights.size(); ++c) {
    g.weights[c] = g.weights[c] * inv_n + l2 * m.weights[c];
  }
  g.bias *= inv_n;
  return g;
}

LogRegModel train_logreg(const FeatureMatrix& x, const Labels& y, const LogRegParams& hp,
                         std::vector<double>* loss_trace) {
  detail::check_training_input(x, y);
  LogRegModel m;
  m.weights.assign(x.cols(), 0.0);
  return descend(
      std::move(m), hp.learning_rate, hp.epochs,
      [&](const LogRegModel& w) { return logreg_objective(w, x, y, hp.l2); },
      [&](const LogRegModel& w) { return logreg_gradient(w, x, y, hp.l2); }, loss_trace);
}

double LinearSvmModel::margin(std::span<const double> x) const { return dot(weights, x) + bias; }

double svm_objective(const LinearSvmModel& m, const FeatureMatrix& x, const Labels& y,
                     double l2) {
  double hinge = 0.0;
  for (std::size_t r = 0; r < x.rows(); ++r) {
    const double s = y[r] == 1 ? 1.0 : -1.0;
    hinge += std::max(0.0, 1.0 - s * m.margin(x.row(r)));
  }
  return hinge / static_cast<double>(x.rows()) + 0.5 * l2 * squared_norm(m.weights);
}

namespace {

LinearSvmModel svm_subgradient(const LinearSvmModel& m, const FeatureMatrix& x, const Labels& y,
                               double l2) {
  LinearSvmModel g;
  g.weights.assign(m.weights.size(), 0.0);
  const double inv_n = 1.0 / static_cast<double>(x.rows());
  for (std::size_t r = 0; r < x.rows(); ++r) {
    const auto row = x.row(r);
    const double s = y[r] == 1 ? 1.0 : -1.0;
    if (s * m.margin(row) < 1.0) {
      for (std::size_t c = 0; c < row.size(); ++c) g.weights[c] -= s * row[c];
      g.bias -= s;
    }
  }
  for (std::size_t c = 0; c < g.weights.size(); ++c) {
    g.weights[c] = g.weights[c] * inv_n + l2 * m.weights[c];
  }
  g.bias *= inv_n;
  return g;
}

double platt_loss(std::span<const double> m, const Labels& y, double a, double b) {
  double loss = 0.0;
  for (std::size_t i = 0; i < m.size(); ++i) {
    const double z = a * m[i] + b;
    loss += softplus(z) - (y[i] == 1 ? z : 0.0);
  }
  return loss;
}

bool has_both_classes(const Labels& y) {
  bool zero = false, one = false;
  for (auto v : y) (v == 1 ? one : zero) = true;
  return zero && one;
}

}  // namespace

std::pair<double, double> fit_platt(std::span<const double> margins, const Labels& y) {
  if (margins.size() != y.size()) {
    throw Error(ErrorCode::LengthMismatch, "margins and labels differ in length");
  }
  if (margins.empty()) return {1.0, 0.0};

  // Tiny ridge on `a` keeps the optimum finite for separable margins.
  constexpr double kRidge = 1e-6;
  double n1 = 0.0;
  for (auto v : y) n1 += v;
  const double n0 = static_cast<double>(y.size()) - n1;
  double a = 0.0;
  double b = std::log((n1 + 1.0) / (n0 + 1.0));
  auto objective = [&](double aa, double bb) {
    return platt_loss(margins, y, aa, bb) + 0.5 * kRidge * aa * aa;
  };
  double current = objective(a, b);

  for (int iter = 0; iter < 100; ++iter) {
    double ga = kRidge * a, gb = 0.0, haa = kRidge, hab = 0.0, hbb = 0.0;
    for (std::size_t i = 0; i < margins.size(); ++i) {
      const double p = sigmoid(a * margins[i] + b);
      const double err = p - static_cast<double>(y[i]);
      const double w = std::max(p * (1.0 - p), 1e-12);
      ga += err * margins[i];
      gb += err;
      haa += w * margins[i] * margins[i];
      hab += w * margins[i];
      hbb += w;
    }
    const double det = haa * hbb - hab * hab;
    if (std::abs(ga) + std::abs(gb) < 1e-10 || det <= 0.0) break;
    const double da = (hbb * ga - hab * gb) / det;
    const double db = (haa * gb - hab * ga) / det;
    double t = 1.0;
    bool improved = false;
    for (int h = 0; h < 40; ++h, t *= 0.5) {
      const double value = objective(a - t * da, b - t * db);
      if (value <= current) {
        a -= t * da;
        b -= t * db;
        improved = value < current - 1e-15;
        current = value;
        break;
      }
    }
    if (!improved) break;
  }
  return {a, b};
}

LinearSvmModel train_svm(const FeatureMatrix& x, const Labels& y, const SvmParams& hp,
                         const FeatureMatrix& calib_x, const Labels& calib_y,
                         std::vector<double>* loss_trace) {
  detail::check_training_input(x, y);
  LinearSvmModel m;
  m.weights.assign(x.cols(), 0.0);
  m = descend(
      std::move(m), hp.learning_rate, hp.epochs,
      [&](const LinearSvmModel& w) { return svm_objective(w, x, y, hp.l2); },
      [&](const LinearSvmModel& w) { return svm_subgradient(w, x, y, hp.l2); }, loss_trace);

  const bool use_calib = calib_x.rows() == calib_y.size() && calib_x.cols() == x.cols() &&
                         has_both_classes(calib_y);
  const FeatureMatrix& cx = use_calib ? calib_x : x;
  const Labels& cy = use_calib ? calib_y : y;
  std::vector<double> margins;
  margins.reserve(cx.rows());
  for (std::size_t r = 0; r < cx.rows(); ++r) margins.push_back(m.margin(cx.row(r)));
  std::tie(m.calib_a, m.calib_b) = fit_platt(margins, cy);
  return m;
}

}  // namespace smartedge
