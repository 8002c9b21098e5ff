#pragma once

#include <cmath>
#include <cstdint>
#include <functional>
#include <iomanip>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "flowforge/classifier.hpp"
#include "flowforge/labels.hpp"
#include "flowforge/preprocess.hpp"
#include "flowforge/table.hpp"

namespace flowforge {

// Percentage with one decimal for the human-readable views, rounding half
// up. The small nudge keeps exact halves (e.g. a true 99.65%) from falling
// just below the boundary through floating-point representation.
inline double percent_1dp(double fraction) {
  return std::floor(fraction * 1000.0 + 0.5 + 1e-7) / 10.0;
}

// counts[actual][predicted]
struct ConfusionMatrix {
  size_t n_classes = 0;
  std::vector<std::vector<int64_t>> counts;

  int64_t total() const {
    int64_t t = 0;
    for (const auto& row : counts)
      for (int64_t v : row) t += v;
    return t;
  }

  int64_t trace() const {
    int64_t t = 0;
    for (size_t i = 0; i < n_classes; ++i) t += counts[i][i];
    return t;
  }

  int64_t tp(size_t c) const { return counts[c][c]; }
  int64_t fp(size_t c) const {
    int64_t t = 0;
    for (size_t a = 0; a < n_classes; ++a)
      if (a != c) t += counts[a][c];
    return t;
  }
  int64_t fn(size_t c) const {
    int64_t t = 0;
    for (size_t p = 0; p < n_classes; ++p)
      if (p != c) t += counts[c][p];
    return t;
  }
};

inline ConfusionMatrix confusion_matrix(const std::vector<int>& actual,
                                        const std::vector<int>& predicted,
                                        size_t n_classes) {
  if (actual.size() != predicted.size()) {
    throw DataError("confusion_matrix: actual/predicted length mismatch");
  }
  ConfusionMatrix cm;
  cm.n_classes = n_classes;
  cm.counts.assign(n_classes, std::vector<int64_t>(n_classes, 0));
  for (size_t i = 0; i < actual.size(); ++i) {
    if (actual[i] < 0 || static_cast<size_t>(actual[i]) >= n_classes ||
        predicted[i] < 0 || static_cast<size_t>(predicted[i]) >= n_classes) {
      throw DataError("confusion_matrix: class index out of range at row " +
                      std::to_string(i));
    }
    cm.counts[actual[i]][predicted[i]]++;
  }
  return cm;
}

struct PrecisionRecallF1 {
  double precision = 0.0;
  double recall = 0.0;
  double f1 = 0.0;
};

/// P = TP/(TP+FP), R = TP/(TP+FN), F1 = 2PR/(P+R); 0/0 is 0 by convention.
inline PrecisionRecallF1 per_class_f1(const ConfusionMatrix& cm, size_t c) {
  if (c >= cm.n_classes) throw DataError("per_class_f1: class index out of range");
  const double tp = static_cast<double>(cm.tp(c));
  const double fp = static_cast<double>(cm.fp(c));
  const double fn = static_cast<double>(cm.fn(c));
  PrecisionRecallF1 m;
  m.precision = tp + fp > 0.0 ? tp / (tp + fp) : 0.0;
  m.recall = tp + fn > 0.0 ? tp / (tp + fn) : 0.0;
  m.f1 = m.precision + m.recall > 0.0
             ? 2.0 * m.precision * m.recall / (m.precision + m.recall)
             : 0.0;
  return m;
}

/// Unweighted mean of the per-class F1 scores, the headline metric.
inline double macro_f1(const ConfusionMatrix& cm) {
  if (cm.n_classes < 2) throw DataError("macro_f1: need at least 2 classes");
  double sum = 0.0;
  for (size_t c = 0; c < cm.n_classes; ++c) sum += per_class_f1(cm, c).f1;
  return sum / static_cast<double>(cm.n_classes);
}

/// Support-weighted mean of per-class F1, reported alongside the macro mean.
inline double weighted_f1(const ConfusionMatrix& cm) {
  double sum = 0.0;
  int64_t total = 0;
  for (size_t c = 0; c < cm.n_classes; ++c) {
    int64_t support = 0;
    for (size_t p = 0; p < cm.n_classes; ++p) support += cm.counts[c][p];
    sum += per_class_f1(cm, c).f1 * static_cast<double>(support);
    total += support;
  }
  return total > 0 ? sum / static_cast<double>(total) : 0.0;
}

inline double accuracy(const ConfusionMatrix& cm) {
  const int64_t total = cm.total();
  return total > 0 ? static_cast<double>(cm.trace()) / static_cast<double>(total) : 0.0;
}

// All evaluation numbers for one experiment, plus the metadata needed to
// reconstruct how they were produced.
struct MetricsReport {
  std::string task;
  std::string classifier;
  std::string feature_k = "all";
  uint64_t seed = 0;
  std::vector<std::string> class_names;
  std::vector<PrecisionRecallF1> per_class;
  double macro_f1 = 0.0;
  double weighted_f1 = 0.0;
  double accuracy = 0.0;
  ConfusionMatrix confusion;

  nlohmann::ordered_json to_json() const {
    nlohmann::ordered_json j;
    j["task"] = task;
    j["classifier"] = classifier;
    j["feature_k"] = feature_k;
    j["seed"] = seed;
    j["accuracy"] = accuracy;
    j["macro_f1"] = macro_f1;
    j["weighted_f1"] = weighted_f1;
    nlohmann::ordered_json per = nlohmann::ordered_json::array();
    for (size_t c = 0; c < per_class.size(); ++c) {
      per.push_back({{"class", c < class_names.size() ? class_names[c]
                                                      : std::to_string(c)},
                     {"precision", per_class[c].precision},
                     {"recall", per_class[c].recall},
                     {"f1", per_class[c].f1}});
    }
    j["per_class"] = std::move(per);
    j["confusion"] = confusion.counts;
    return j;
  }

  // one-decimal percentage text view
  std::string to_text() const {
    std::ostringstream os;
    os << std::fixed << std::setprecision(1);
    os << task << " / " << classifier << " / k=" << feature_k << "\n";
    os << "  accuracy " << percent_1dp(accuracy) << "%  macro-f1 "
       << percent_1dp(macro_f1) << "%  weighted-f1 " << percent_1dp(weighted_f1)
       << "%\n";
    for (size_t c = 0; c < per_class.size(); ++c) {
      os << "  " << std::setw(32) << std::left
         << (c < class_names.size() ? class_names[c] : std::to_string(c))
         << std::right << "  P " << std::setw(5) << percent_1dp(per_class[c].precision)
         << "%  R " << std::setw(5) << percent_1dp(per_class[c].recall) << "%  F1 "
         << std::setw(5) << percent_1dp(per_class[c].f1) << "%\n";
    }
    return os.str();
  }
};

/// Predicts the test table with the model and scores it against the task's
/// target column.
inline MetricsReport evaluate_model(const ClassifierModel& model,
                                    const FlowTable& test, const LabelTask& task) {
  if (test.row_count() == 0) throw DataError("evaluate_model: empty test set");
  const std::vector<int> actual = class_codes(test, kTargetColumn);
  const std::vector<int> predicted = model.predict_table(test);

  size_t n_classes = std::max(task.num_classes(), model.n_classes());
  MetricsReport r;
  r.task = to_string(task.variant);
  r.classifier = to_string(model.kind());
  r.class_names = task.class_names.empty() ? model.class_names : task.class_names;
  r.confusion = confusion_matrix(actual, predicted, n_classes);
  r.per_class.reserve(n_classes);
  for (size_t c = 0; c < n_classes; ++c) r.per_class.push_back(per_class_f1(r.confusion, c));
  r.macro_f1 = macro_f1(r.confusion);
  r.weighted_f1 = weighted_f1(r.confusion);
  r.accuracy = accuracy(r.confusion);
  return r;
}

// ---------------------------------------------------------------------------
// Cross-validation
// ---------------------------------------------------------------------------

struct MeanStd {
  double mean = 0.0;
  double stddev = 0.0;
};

inline MeanStd mean_std(const std::vector<double>& xs) {
  MeanStd ms;
  if (xs.empty()) return ms;
  for (double x : xs) ms.mean += x;
  ms.mean /= static_cast<double>(xs.size());
  double var = 0.0;
  for (double x : xs) var += (x - ms.mean) * (x - ms.mean);
  ms.stddev = std::sqrt(var / static_cast<double>(xs.size()));
  return ms;
}

struct CrossValidationReport {
  std::vector<MetricsReport> folds;
  MeanStd macro_f1;
  MeanStd weighted_f1;
  MeanStd accuracy;
  std::vector<MeanStd> per_class_f1;

  nlohmann::ordered_json to_json() const {
    nlohmann::ordered_json j;
    j["k"] = folds.size();
    j["macro_f1"] = {{"mean", macro_f1.mean}, {"stddev", macro_f1.stddev}};
    j["weighted_f1"] = {{"mean", weighted_f1.mean}, {"stddev", weighted_f1.stddev}};
    j["accuracy"] = {{"mean", accuracy.mean}, {"stddev", accuracy.stddev}};
    nlohmann::ordered_json per = nlohmann::ordered_json::array();
    for (const auto& ms : per_class_f1) {
      per.push_back({{"mean", ms.mean}, {"stddev", ms.stddev}});
    }
    j["per_class_f1"] = std::move(per);
    nlohmann::ordered_json folds_json = nlohmann::ordered_json::array();
    for (const auto& f : folds) folds_json.push_back(f.to_json());
    j["folds"] = std::move(folds_json);
    return j;
  }
};

// Trains on everything outside the fold; evaluation applies the model's own
// stored normalization.
using FoldModelFn = std::function<ClassifierModel(const FlowTable& train)>;

/// Runs one train/evaluate round per fold and aggregates the metrics
/// (mean and population stddev); the per-fold reports are retained.
inline CrossValidationReport cross_validate(const FlowTable& table,
                                            const LabelTask& task,
                                            const FoldAssignment& folds,
                                            const FoldModelFn& fit) {
  CrossValidationReport cv;
  std::vector<double> macros, weighteds, accs;
  std::vector<std::vector<double>> per_class;

  for (size_t fold = 0; fold < folds.k; ++fold) {
    const auto test_rows = folds.fold_rows(fold);
    const auto train_rows = folds.rest_rows(fold);
    if (test_rows.empty() || train_rows.empty()) {
      throw DataError("cross_validate: fold " + std::to_string(fold) + " is empty");
    }
    ClassifierModel model = fit(table.take(train_rows));
    MetricsReport r = evaluate_model(model, table.take(test_rows), task);
    macros.push_back(r.macro_f1);
    weighteds.push_back(r.weighted_f1);
    accs.push_back(r.accuracy);
    if (per_class.size() < r.per_class.size()) per_class.resize(r.per_class.size());
    for (size_t c = 0; c < r.per_class.size(); ++c) {
      per_class[c].push_back(r.per_class[c].f1);
    }
    cv.folds.push_back(std::move(r));
  }

  cv.macro_f1 = mean_std(macros);
  cv.weighted_f1 = mean_std(weighteds);
  cv.accuracy = mean_std(accs);
  for (const auto& xs : per_class) cv.per_class_f1.push_back(mean_std(xs));
  return cv;
}

}  // namespace flowforge
