#include "json_io.hpp"

#include <string>

#include "smartedge/error.hpp"

namespace smartedge::detail {

using nlohmann::json;

namespace {

template <class... Ts>
struct Overloaded : Ts... {
  using Ts::operator()...;
};
template <class... Ts>
Overloaded(Ts...) -> Overloaded<Ts...>;

json tree_to_json(const DecisionTreeModel& t) {
  json nodes = json::array();
  for (const auto& n : t.nodes) {
    if (n.is_leaf()) {
      nodes.push_back({{"counts", {n.counts[0], n.counts[1]}}});
    } else {
      nodes.push_back({{"feature", n.feature},
                       {"threshold", n.threshold},
                       {"left", n.left},
                       {"right", n.right},
                       {"counts", {n.counts[0], n.counts[1]}}});
    }
  }
  return {{"arity", t.arity}, {"nodes", std::move(nodes)}};
}

void check_tree_links(int feature, int left, int right, std::size_t count, std::size_t arity) {
  if (feature < 0) return;
  const auto valid = [&](int child) { return child > 0 && static_cast<std::size_t>(child) < count; };
  if (static_cast<std::size_t>(feature) >= arity || !valid(left) || !valid(right)) {
    throw Error(ErrorCode::MalformedModel, "tree node references an invalid feature or child");
  }
}

DecisionTreeModel tree_from_json(const json& j) {
  DecisionTreeModel t;
  t.arity = j.at("arity").get<std::size_t>();
  const auto& nodes = j.at("nodes");
  if (nodes.empty()) throw Error(ErrorCode::MalformedModel, "tree has no nodes");
  for (const auto& n : nodes) {
    TreeNode node;
    node.counts = {n.at("counts").at(0).get<std::uint64_t>(),
                   n.at("counts").at(1).get<std::uint64_t>()};
    if (n.contains("feature")) {
      node.feature = n.at("feature").get<int>();
      node.threshold = n.at("threshold").get<double>();
      node.left = n.at("left").get<int>();
      node.right = n.at("right").get<int>();
    }
    t.nodes.push_back(node);
  }
  for (const auto& n : t.nodes) check_tree_links(n.feature, n.left, n.right, t.nodes.size(), t.arity);
  return t;
}

json regression_tree_to_json(const RegressionTree& t) {
  json nodes = json::array();
  for (const auto& n : t.nodes) {
    if (n.is_leaf()) {
      nodes.push_back({{"value", n.value}});
    } else {
      nodes.push_back({{"feature", n.feature},
                       {"threshold", n.threshold},
                       {"left", n.left},
                       {"right", n.right},
                       {"value", n.value}});
    }
  }
  return nodes;
}

RegressionTree regression_tree_from_json(const json& j, std::size_t arity) {
  RegressionTree t;
  if (j.empty()) throw Error(ErrorCode::MalformedModel, "regression tree has no nodes");
  for (const auto& n : j) {
    RegressionNode node;
    node.value = n.at("value").get<double>();
    if (n.contains("feature")) {
      node.feature = n.at("feature").get<int>();
      node.threshold = n.at("threshold").get<double>();
      node.left = n.at("left").get<int>();
      node.right = n.at("right").get<int>();
    }
    t.nodes.push_back(node);
  }
  for (const auto& n : t.nodes) check_tree_links(n.feature, n.left, n.right, t.nodes.size(), arity);
  return t;
}

}  // namespace

json parse_json(std::string_view text, ErrorCode on_error) {
  try {
    return json::parse(text.begin(), text.end());
  } catch (const json::exception& e) {
    throw Error(on_error, e.what());
  }
}

json model_to_json(const TrainedModel& m) {
  json j = std::visit(
      Overloaded{
          [](const LogRegModel& lr) -> json {
            return {{"kind", "logreg"}, {"weights", lr.weights}, {"bias", lr.bias}};
          },
          [](const DecisionTreeModel& t) -> json {
            json out = tree_to_json(t);
            out["kind"] = "decision_tree";
            return out;
          },
          [](const RandomForestModel& f) -> json {
            json trees = json::array();
            for (const auto& t : f.trees) trees.push_back(tree_to_json(t));
            return {{"kind", "random_forest"}, {"seed", f.seed}, {"trees", std::move(trees)}};
          },
          [](const GradBoostModel& g) -> json {
            json trees = json::array();
            for (const auto& t : g.trees) trees.push_back(regression_tree_to_json(t));
            return {{"kind", "grad_boost"},
                    {"arity", g.arity},
                    {"init_logit", g.init_logit},
                    {"learning_rate", g.learning_rate},
                    {"trees", std::move(trees)}};
          },
          [](const LinearSvmModel& s) -> json {
            return {{"kind", "linear_svm"},   {"weights", s.weights}, {"bias", s.bias},
                    {"calib_a", s.calib_a}, {"calib_b", s.calib_b}};
          },
      },
      m);
  j["version"] = kModelFormatVersion;
  return j;
}

TrainedModel model_from_json(const json& j) {
  try {
    if (j.at("version").get<int>() != kModelFormatVersion) {
      throw Error(ErrorCode::MalformedModel, "unsupported model version");
    }
    const auto kind = j.at("kind").get<std::string>();
    if (kind == "logreg") {
      return LogRegModel{j.at("weights").get<std::vector<double>>(), j.at("bias").get<double>()};
    }
    if (kind == "decision_tree") return tree_from_json(j);
    if (kind == "random_forest") {
      RandomForestModel f;
      f.seed = j.at("seed").get<std::uint64_t>();
      for (const auto& t : j.at("trees")) f.trees.push_back(tree_from_json(t));
      if (f.trees.empty()) throw Error(ErrorCode::MalformedModel, "forest has no trees");
      return f;
    }
    if (kind == "grad_boost") {
      GradBoostModel g;
      g.arity = j.at("arity").get<std::size_t>();
      g.init_logit = j.at("init_logit").get<double>();
      g.learning_rate = j.at("learning_rate").get<double>();
      for (const auto& t : j.at("trees")) g.trees.push_back(regression_tree_from_json(t, g.arity));
      return g;
    }
    if (kind == "linear_svm") {
      LinearSvmModel s;
      s.weights = j.at("weights").get<std::vector<double>>();
      s.bias = j.at("bias").get<double>();
      s.calib_a = j.at("calib_a").get<double>();
      s.calib_b = j.at("calib_b").get<double>();
      return s;
    }
    throw Error(ErrorCode::MalformedModel, "unknown model kind '" + kind + "'");
  } catch (const json::exception& e) {
    throw Error(ErrorCode::MalformedModel, e.what());
  }
}

json ensemble_to_json(const Ensemble& e) {
  json members = json::array();
  for (const auto& m : e.members) members.push_back(model_to_json(m));
  return {{"kind", "ensemble"},
          {"version", kModelFormatVersion},
          {"mode", std::string(to_string(e.mode))},
          {"combo_name", e.combo_name},
          {"members", std::move(members)}};
}

Ensemble ensemble_from_json(const json& j) {
  try {
    if (j.at("kind").get<std::string>() != "ensemble" ||
        j.at("version").get<int>() != kModelFormatVersion) {
      throw Error(ErrorCode::MalformedModel, "not a version-1 ensemble document");
    }
    Ensemble e;
    const auto mode = parse_voting_mode(j.at("mode").get<std::string>());
    if (!mode) throw Error(ErrorCode::MalformedModel, "unknown voting mode");
    e.mode = *mode;
    e.combo_name = j.at("combo_name").get<std::string>();
    for (const auto& m : j.at("members")) e.members.push_back(model_from_json(m));
    return e;
  } catch (const json::exception& ex) {
    throw Error(ErrorCode::MalformedModel, ex.what());
  }
}

json scaler_to_json(const Scaler& s) { return {{"mean", s.mean}, {"std", s.stddev}}; }

Scaler scaler_from_json(const json& j) {
  Scaler s{j.at("mean").get<std::vector<double>>(), j.at("std").get<std::vector<double>>()};
  if (s.mean.size() != s.stddev.size()) {
    throw Error(ErrorCode::MalformedModel, "scaler mean/std lengths differ");
  }
  return s;
}

json mask_to_json(const FeatureMask& m) {
  return {{"selected", m.selected}, {"elimination_order", m.elimination_order}};
}

FeatureMask mask_from_json(const json& j) {
  return {j.at("selected").get<std::vector<std::size_t>>(),
          j.at("elimination_order").get<std::vector<std::size_t>>()};
}

json hyperparams_to_json(const Hyperparams& hp) {
  return {
      {"logreg",
       {{"learning_rate", hp.logreg.learning_rate},
        {"epochs", hp.logreg.epochs},
        {"l2", hp.logreg.l2}}},
      {"tree", {{"max_depth", hp.tree.max_depth}, {"min_samples_split", hp.tree.min_samples_split}}},
      {"forest",
       {{"n_trees", hp.forest.n_trees},
        {"max_depth", hp.forest.max_depth},
        {"features_per_split", hp.forest.features_per_split},
        {"min_samples_split", hp.forest.min_samples_split},
        {"bootstrap", hp.forest.bootstrap}}},
      {"gbm",
       {{"n_rounds", hp.gbm.n_rounds},
        {"learning_rate", hp.gbm.learning_rate},
        {"max_depth", hp.gbm.max_depth}}},
      {"svm",
       {{"learning_rate", hp.svm.learning_rate}, {"epochs", hp.svm.epochs}, {"l2", hp.svm.l2}}},
      {"seed", hp.seed},
  };
}

Hyperparams hyperparams_from_json(const json& j) {
  Hyperparams hp;
  const auto& lr = j.at("logreg");
  hp.logreg = {lr.at("learning_rate").get<double>(), lr.at("epochs").get<int>(),
               lr.at("l2").get<double>()};
  const auto& t = j.at("tree");
  hp.tree = {t.at("max_depth").get<int>(), t.at("min_samples_split").get<int>()};
  const auto& f = j.at("forest");
  hp.forest = {f.at("n_trees").get<int>(), f.at("max_depth").get<int>(),
               f.at("features_per_split").get<int>(), f.at("min_samples_split").get<int>(),
               f.at("bootstrap").get<bool>()};
  const auto& g = j.at("gbm");
  hp.gbm = {g.at("n_rounds").get<int>(), g.at("learning_rate").get<double>(),
            g.at("max_depth").get<int>()};
  const auto& s = j.at("svm");
  hp.svm = {s.at("learning_rate").get<double>(), s.at("epochs").get<int>(),
            s.at("l2").get<double>()};
  hp.seed = j.at("seed").get<std::uint64_t>();
  return hp;
}

json prediction_to_json(const Prediction& p) {
  return {{"label", p.label}, {"probs", {p.probs[0], p.probs[1]}}};
}

Prediction prediction_from_json(const json& j) {
  Prediction p;
  p.label = j.at("label").get<Label>();
  p.probs = {j.at("probs").at(0).get<double>(), j.at("probs").at(1).get<double>()};
  return p;
}

}  // namespace smartedge::detail

namespace smartedge {

std::string serialize_model(const TrainedModel& m) { return detail::model_to_json(m).dump(); }

TrainedModel deserialize_model(std::string_view text) {
  return detail::model_from_json(detail::parse_json(text, ErrorCode::MalformedModel));
}

std::string serialize_ensemble(const Ensemble& e) { return detail::ensemble_to_json(e).dump(); }

Ensemble deserialize_ensemble(std::string_view text) {
  return detail::ensemble_from_json(detail::parse_json(text, ErrorCode::MalformedModel));
}

}  // namespace smartedge
