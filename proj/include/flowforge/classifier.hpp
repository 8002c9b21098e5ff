#pragma once

#include <fstream>
#include <optional>
#include <span>
#include <string>
#include <variant>
#include <vector>

#include <json.hpp>

#include "flowforge/forest.hpp"
#include "flowforge/naive_bayes.hpp"
#include "flowforge/preprocess.hpp"
#include "flowforge/tree.hpp"

namespace flowforge {

enum class ClassifierKind { decision_tree, random_forest, naive_bayes };

inline const char* to_string(ClassifierKind k) {
  switch (k) {
    case ClassifierKind::decision_tree: return "decision_tree";
    case ClassifierKind::random_forest: return "random_forest";
    case ClassifierKind::naive_bayes: return "naive_bayes";
  }
  return "?";
}

inline ClassifierKind classifier_from_string(const std::string& s) {
  if (s == "decision_tree" || s == "dt") return ClassifierKind::decision_tree;
  if (s == "random_forest" || s == "rf") return ClassifierKind::random_forest;
  if (s == "naive_bayes" || s == "nb") return ClassifierKind::naive_bayes;
  throw ConfigError("unknown classifier: \"" + s + "\" (expected dt|rf|nb)");
}

// A trained model plus everything needed to apply it to new tables: the
// feature list it was trained on, the class names, and the normalization
// ranges fitted on its training data. Immutable after training.
struct ClassifierModel {
  std::variant<DecisionTree, RandomForest, NBModel> model;
  std::vector<std::string> features;
  std::vector<std::string> class_names;
  std::optional<NormalizationParams> normalization;

  ClassifierKind kind() const {
    if (std::holds_alternative<DecisionTree>(model)) return ClassifierKind::decision_tree;
    if (std::holds_alternative<RandomForest>(model)) return ClassifierKind::random_forest;
    return ClassifierKind::naive_bayes;
  }

  size_t n_classes() const {
    return std::visit(
        [](const auto& m) -> size_t {
          if constexpr (std::is_same_v<std::decay_t<decltype(m)>, NBModel>) {
            return m.n_classes();
          } else {
            return m.n_classes;
          }
        },
        model);
  }

  int predict_row(std::span<const double> x) const {
    if (x.size() != features.size()) {
      throw DataError("predict: expected " + std::to_string(features.size()) +
                      " features, got " + std::to_string(x.size()));
    }
    return std::visit([&](const auto& m) { return m.predict_row(x); }, model);
  }

  // Applies the stored normalization and predicts every row. Columns are
  // matched by name; a missing column is a feature-mismatch error.
  std::vector<int> predict_table(const FlowTable& table) const {
    std::vector<const std::vector<double>*> cols;
    cols.reserve(features.size());
    for (const auto& name : features) {
      int idx = table.find(name);
      if (idx < 0) {
        throw DataError("predict: model feature \"" + name +
                        "\" not present in table");
      }
      cols.push_back(&table.numeric(idx));
    }
    std::vector<std::pair<double, double>> ranges(features.size(), {0.0, 0.0});
    bool scale = normalization.has_value();
    if (scale) {
      for (size_t j = 0; j < features.size(); ++j) {
        auto it = normalization->by_column.find(features[j]);
        if (it == normalization->by_column.end()) {
          throw DataError("predict: no normalization range for feature \"" +
                          features[j] + "\"");
        }
        ranges[j] = it->second;
      }
    }
    std::vector<int> out(table.row_count());
    std::vector<double> x(features.size());
    for (size_t r = 0; r < table.row_count(); ++r) {
      for (size_t j = 0; j < features.size(); ++j) {
        double v = (*cols[j])[r];
        if (scale) {
          const auto [lo, hi] = ranges[j];
          v = hi > lo ? std::clamp((v - lo) / (hi - lo), 0.0, 1.0) : 0.0;
        }
        x[j] = v;
      }
      out[r] = predict_row(x);
    }
    return out;
  }
};

// ---------------------------------------------------------------------------
// JSON serialization (round-trip reproduces identical predictions)
// ---------------------------------------------------------------------------

namespace detail {

inline nlohmann::ordered_json nodes_to_json(const DecisionTree& t) {
  nlohmann::ordered_json nodes = nlohmann::ordered_json::array();
  for (const auto& nd : t.nodes) {
    nlohmann::ordered_json j;
    j["f"] = nd.feature;
    j["t"] = nd.threshold;
    j["l"] = nd.left;
    j["r"] = nd.right;
    j["p"] = nd.prediction;
    j["h"] = nd.histogram;
    nodes.push_back(std::move(j));
  }
  return nodes;
}

inline void nodes_from_json(const nlohmann::json& arr, DecisionTree& t) {
  for (const auto& j : arr) {
    TreeNode nd;
    nd.feature = j.at("f").get<int>();
    nd.threshold = j.at("t").get<double>();
    nd.left = j.at("l").get<int>();
    nd.right = j.at("r").get<int>();
    nd.prediction = j.at("p").get<int>();
    nd.histogram = j.at("h").get<std::vector<int64_t>>();
    t.nodes.push_back(std::move(nd));
  }
}

}  // namespace detail

inline nlohmann::ordered_json model_to_json(const ClassifierModel& cm) {
  nlohmann::ordered_json j;
  j["type"] = to_string(cm.kind());
  j["features"] = cm.features;
  j["classes"] = cm.class_names;
  switch (cm.kind()) {
    case ClassifierKind::decision_tree: {
      const auto& t = std::get<DecisionTree>(cm.model);
      j["n_classes"] = t.n_classes;
      j["boundaries"] = t.boundaries;
      j["nodes"] = detail::nodes_to_json(t);
      break;
    }
    case ClassifierKind::random_forest: {
      const auto& f = std::get<RandomForest>(cm.model);
      j["n_classes"] = f.n_classes;
      j["seed"] = f.seed;
      // boundaries are shared across the ensemble
      j["boundaries"] = f.trees.empty() ? nlohmann::ordered_json::array()
                                        : nlohmann::ordered_json(f.trees[0].boundaries);
      nlohmann::ordered_json trees = nlohmann::ordered_json::array();
      for (const auto& t : f.trees) trees.push_back(detail::nodes_to_json(t));
      j["trees"] = std::move(trees);
      break;
    }
    case ClassifierKind::naive_bayes: {
      const auto& m = std::get<NBModel>(cm.model);
      j["smoothing"] = m.smoothing;
      j["log_priors"] = m.log_priors;
      j["log_theta"] = m.log_theta;
      break;
    }
  }
  if (cm.normalization) j["normalization"] = cm.normalization->to_json();
  return j;
}

inline ClassifierModel model_from_json(const nlohmann::json& j) {
  ClassifierModel cm;
  cm.features = j.at("features").get<std::vector<std::string>>();
  cm.class_names = j.at("classes").get<std::vector<std::string>>();
  const std::string type = j.at("type").get<std::string>();
  if (type == "decision_tree") {
    DecisionTree t;
    t.n_classes = j.at("n_classes").get<size_t>();
    t.boundaries = j.at("boundaries").get<std::vector<std::vector<double>>>();
    detail::nodes_from_json(j.at("nodes"), t);
    cm.model = std::move(t);
  } else if (type == "random_forest") {
    RandomForest f;
    f.n_classes = j.at("n_classes").get<size_t>();
    f.seed = j.at("seed").get<uint64_t>();
    auto boundaries = j.at("boundaries").get<std::vector<std::vector<double>>>();
    for (const auto& jt : j.at("trees")) {
      DecisionTree t;
      t.n_classes = f.n_classes;
      t.boundaries = boundaries;
      detail::nodes_from_json(jt, t);
      f.trees.push_back(std::move(t));
    }
    cm.model = std::move(f);
  } else if (type == "naive_bayes") {
    NBModel m;
    m.smoothing = j.at("smoothing").get<double>();
    m.log_priors = j.at("log_priors").get<std::vector<double>>();
    m.log_theta = j.at("log_theta").get<std::vector<std::vector<double>>>();
    cm.model = std::move(m);
  } else {
    throw DataError("unknown model type in JSON: \"" + type + "\"");
  }
  if (j.contains("normalization")) {
    cm.normalization = NormalizationParams::from_json(j.at("normalization"));
  }
  return cm;
}

inline void save_model(const ClassifierModel& cm, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw DataError("cannot write model file: " + path);
  out << model_to_json(cm).dump(2) << "\n";
}

inline ClassifierModel load_model(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open model file: " + path);
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    throw DataError("invalid model JSON in " + path + ": " + e.what());
  }
  return model_from_json(j);
}

}  // namespace flowforge
