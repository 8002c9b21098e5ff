#pragma once

#include <cmath>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "flowforge/table.hpp"

namespace flowforge {

// Multinomial naive Bayes in log space. Requires non-negative features,
// which min-max normalization guarantees.
struct NBModel {
  double smoothing = 1.0;
  std::vector<double> log_priors;               // per class
  std::vector<std::vector<double>> log_theta;   // [class][feature]

  size_t n_classes() const { return log_priors.size(); }

  // argmax_c log P(c) + sum_j x_j log theta_cj; ties go to the lowest class
  int predict_row(std::span<const double> x) const {
    size_t best = 0;
    double best_score = -std::numeric_limits<double>::infinity();
    for (size_t c = 0; c < log_priors.size(); ++c) {
      double score = log_priors[c];
      for (size_t j = 0; j < x.size(); ++j) score += x[j] * log_theta[c][j];
      if (score > best_score) {
        best_score = score;
        best = c;
      }
    }
    return static_cast<int>(best);
  }
};

/// Fits the multinomial model: prior_c = n_c / n and
/// theta_cj = (sum of feature j over class c + smoothing) /
///            (sum of all features over class c + smoothing * d).
inline NBModel train_naive_bayes(const FlowTable& train, const std::string& target_col,
                                 const std::vector<std::string>& features,
                                 double smoothing = 1.0) {
  if (train.row_count() == 0) throw DataError("training set is empty");
  if (smoothing < 0.0) throw ConfigError("naive bayes: smoothing must be >= 0");
  if (features.empty()) throw DataError("no feature columns to train on");

  const std::vector<int> target = class_codes(train, target_col);
  int max_cls = 0;
  for (int c : target) max_cls = std::max(max_cls, c);
  const size_t k = static_cast<size_t>(max_cls) + 1;
  const size_t d = features.size();

  std::vector<const std::vector<double>*> cols;
  cols.reserve(d);
  for (const auto& name : features) cols.push_back(&train.numeric(train.require(name)));

  std::vector<int64_t> n_per_class(k, 0);
  std::vector<std::vector<double>> feature_sums(k, std::vector<double>(d, 0.0));
  for (size_t r = 0; r < train.row_count(); ++r) {
    const auto c = static_cast<size_t>(target[r]);
    n_per_class[c]++;
    for (size_t j = 0; j < d; ++j) {
      const double x = (*cols[j])[r];
      if (x < 0.0 || std::isnan(x)) {
        throw DataError("naive bayes: feature \"" + features[j] +
                        "\" has a negative or missing value at row " +
                        std::to_string(r));
      }
      feature_sums[c][j] += x;
    }
  }

  NBModel model;
  model.smoothing = smoothing;
  model.log_priors.resize(k);
  model.log_theta.assign(k, std::vector<double>(d, 0.0));
  const auto n = static_cast<double>(train.row_count());
  for (size_t c = 0; c < k; ++c) {
    model.log_priors[c] = n_per_class[c] > 0
                              ? std::log(static_cast<double>(n_per_class[c]) / n)
                              : -std::numeric_limits<double>::infinity();
    double total = 0.0;
    for (size_t j = 0; j < d; ++j) total += feature_sums[c][j];
    const double denom = total + smoothing * static_cast<double>(d);
    for (size_t j = 0; j < d; ++j) {
      model.log_theta[c][j] = std::log((feature_sums[c][j] + smoothing) / denom);
    }
  }
  return model;
}

}  // namespace flowforge
