#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <string>
#include <vector>

#include <json.hpp>

#include "flowforge/table.hpp"

namespace flowforge {

inline constexpr int kSelectAll = -1;

// ---------------------------------------------------------------------------
// Binning
// ---------------------------------------------------------------------------

/// Equal-width bin over [0, 1]: floor(v * num_bins), with v == 1.0 clamped
/// into the last bin. Values outside [0, 1] are a domain error (run
/// normalization first).
inline int bin_value(double v, int num_bins) {
  if (std::isnan(v) || v < 0.0 || v > 1.0) {
    throw DataError("bin_continuous: value " + std::to_string(v) +
                    " outside [0, 1]");
  }
  int b = static_cast<int>(v * num_bins);
  return std::min(b, num_bins - 1);
}

inline std::vector<int> bin_continuous(const std::vector<double>& column,
                                       int num_bins) {
  if (num_bins < 2) throw ConfigError("bin_continuous: num_bins must be >= 2");
  std::vector<int> bins(column.size());
  for (size_t i = 0; i < column.size(); ++i) bins[i] = bin_value(column[i], num_bins);
  return bins;
}

// ---------------------------------------------------------------------------
// Chi-square statistic
// ---------------------------------------------------------------------------

// Observed counts of (feature bin, class) pairs with the usual marginals.
struct ContingencyTable {
  std::vector<std::vector<int64_t>> observed;  // [bin][class]
  std::vector<int64_t> row_totals;
  std::vector<int64_t> col_totals;
  int64_t grand_total = 0;

  static ContingencyTable from_columns(const std::vector<int>& feature,
                                       const std::vector<int>& target) {
    if (feature.size() != target.size()) {
      throw DataError("contingency table: feature/target length mismatch");
    }
    ContingencyTable ct;
    int max_bin = -1, max_cls = -1;
    for (size_t i = 0; i < feature.size(); ++i) {
      max_bin = std::max(max_bin, feature[i]);
      max_cls = std::max(max_cls, target[i]);
    }
    ct.observed.assign(max_bin + 1, std::vector<int64_t>(max_cls + 1, 0));
    ct.row_totals.assign(max_bin + 1, 0);
    ct.col_totals.assign(max_cls + 1, 0);
    for (size_t i = 0; i < feature.size(); ++i) {
      ct.observed[feature[i]][target[i]]++;
      ct.row_totals[feature[i]]++;
      ct.col_totals[target[i]]++;
      ct.grand_total++;
    }
    return ct;
  }
};

struct ChiSqStat {
  double statistic = 0.0;
  int dof = 1;
};

/// Pearson chi-square over a contingency table: sum of (O-E)^2/E with
/// E = row_total * col_total / N. Cells with E == 0 contribute nothing and
/// empty rows/columns do not count toward the degrees of freedom.
inline ChiSqStat chi_square_from_contingency(const ContingencyTable& ct) {
  double stat = 0.0;
  int live_rows = 0, live_cols = 0;
  const double n = static_cast<double>(ct.grand_total);
  for (int64_t rt : ct.row_totals) live_rows += rt > 0 ? 1 : 0;
  for (int64_t c : ct.col_totals) live_cols += c > 0 ? 1 : 0;
  for (size_t r = 0; r < ct.observed.size(); ++r) {
    if (ct.row_totals[r] == 0) continue;
    for (size_t c = 0; c < ct.observed[r].size(); ++c) {
      if (ct.col_totals[c] == 0) continue;
      const double expected = static_cast<double>(ct.row_totals[r]) *
                              static_cast<double>(ct.col_totals[c]) / n;
      const double diff = static_cast<double>(ct.observed[r][c]) - expected;
      stat += diff * diff / expected;
    }
  }
  int dof = std::max(1, (std::max(live_rows, 1) - 1) * (std::max(live_cols, 1) - 1));
  return {stat, dof};
}

inline ChiSqStat chi_square_statistic(const std::vector<int>& feature,
                                      const std::vector<int>& target) {
  if (feature.empty()) throw DataError("chi_square_statistic: empty columns");
  return chi_square_from_contingency(ContingencyTable::from_columns(feature, target));
}

// ---------------------------------------------------------------------------
// Ranking and selection
// ---------------------------------------------------------------------------

struct FeatureScore {
  std::string feature;
  double statistic = 0.0;
  int dof = 1;
};

// Candidate features ordered by statistic descending; ties broken by
// feature name ascending so the ranking is deterministic.
struct ChiSqRanking {
  std::vector<FeatureScore> scores;

  std::vector<std::string> top(size_t k) const {
    std::vector<std::string> names;
    names.reserve(k);
    for (size_t i = 0; i < k && i < scores.size(); ++i) {
      names.push_back(scores[i].feature);
    }
    return names;
  }

  nlohmann::ordered_json to_json() const {
    nlohmann::ordered_json j = nlohmann::ordered_json::array();
    for (const auto& s : scores) {
      j.push_back({{"feature", s.feature}, {"chi2", s.statistic}, {"dof", s.dof}});
    }
    return j;
  }
};

struct SelectionResult {
  ChiSqRanking ranking;
  std::vector<std::string> selected;
};

/// Ranks every candidate feature (non-excluded, non-label) by chi-square
/// against the target classes and returns the top k names. k == kSelectAll
/// selects every candidate; k greater than the candidate count is a
/// configuration error rather than a silent clamp.
inline SelectionResult select_top_k(const FlowTable& table,
                                    const std::string& target_col, int k,
                                    int num_bins = 32) {
  const std::vector<int> target = class_codes(table, target_col);

  const auto candidates = table.feature_columns();
  if (k != kSelectAll &&
      (k <= 0 || static_cast<size_t>(k) > candidates.size())) {
    throw ConfigError("select_top_k: k=" + std::to_string(k) + " but only " +
                      std::to_string(candidates.size()) + " candidate features");
  }

  ChiSqRanking ranking;
  ranking.scores.reserve(candidates.size());
  for (size_t col : candidates) {
    const auto bins = bin_continuous(table.numeric(col), num_bins);
    const ChiSqStat s = chi_square_statistic(bins, target);
    ranking.scores.push_back({table.schema().columns[col].name, s.statistic, s.dof});
  }
  std::stable_sort(ranking.scores.begin(), ranking.scores.end(),
                   [](const FeatureScore& a, const FeatureScore& b) {
                     if (a.statistic != b.statistic) return a.statistic > b.statistic;
                     return a.feature < b.feature;
                   });

  const size_t take = k == kSelectAll ? ranking.scores.size() : static_cast<size_t>(k);
  std::vector<std::string> selected = ranking.top(take);
  return {std::move(ranking), std::move(selected)};
}

}  // namespace flowforge
