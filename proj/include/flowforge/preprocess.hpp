#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <iostream>
#include <map>
#include <optional>
#include <string>
#include <unordered_set>
#include <utility>
#include <vector>

#include <json.hpp>

#include "flowforge/labels.hpp"
#include "flowforge/rng.hpp"
#include "flowforge/table.hpp"

namespace flowforge {

// ---------------------------------------------------------------------------
// String indexing
// ---------------------------------------------------------------------------

// Dictionary for one indexed column: string -> dense integer code, most
// frequent string first, ties broken lexicographically.
struct IndexMap {
  std::string column;
  std::map<std::string, int64_t> mapping;

  std::vector<std::string> by_code() const {
    std::vector<std::string> inv(mapping.size());
    for (const auto& [s, c] : mapping) inv[static_cast<size_t>(c)] = s;
    return inv;
  }
};

struct IndexResult {
  FlowTable table;
  std::vector<IndexMap> maps;
};

// The columns the pipeline indexes by default: every categorical column that
// still holds strings, plus the binary label column. On the stock flow
// schema this is exactly {proto, flgs, state, sport, dport, label}.
inline std::vector<std::string> default_index_columns(const FlowTable& table) {
  std::vector<std::string> cols;
  for (const auto& c : table.schema().columns) {
    if (c.indexed) continue;
    if (c.kind == ColumnKind::categorical || c.kind == ColumnKind::label_binary) {
      cols.push_back(c.name);
    }
  }
  return cols;
}

/// Replaces each named string column with integer codes. Missing-marker
/// cells stay missing (NaN) instead of receiving a code. The binary label
/// column gets a semantic override: tokens classified as normal sort before
/// attack tokens, so {"normal","attack"} maps to {normal:0, attack:1}
/// regardless of frequency.
inline IndexResult index_strings(const FlowTable& table,
                                 const std::vector<std::string>& columns) {
  FlowTable out = table;
  std::vector<IndexMap> maps;
  maps.reserve(columns.size());

  for (const auto& name : columns) {
    const int col = table.require(name);
    const auto& values = table.strings(col);  // throws if already numeric
    const ColumnKind kind = table.schema().columns[col].kind;

    std::map<std::string, int64_t> freq;
    for (const auto& v : values) {
      if (!table.schema().is_missing_marker(v)) freq[v]++;
    }

    std::vector<std::string> ordered = order_by_frequency(freq);
    if (kind == ColumnKind::label_binary) {
      std::stable_sort(ordered.begin(), ordered.end(),
                       [](const std::string& a, const std::string& b) {
                         return !detail::token_is_attack(a) && detail::token_is_attack(b);
                       });
    }

    IndexMap im;
    im.column = name;
    for (size_t i = 0; i < ordered.size(); ++i) {
      im.mapping[ordered[i]] = static_cast<int64_t>(i);
    }

    std::vector<double> codes(values.size());
    for (size_t r = 0; r < values.size(); ++r) {
      if (table.schema().is_missing_marker(values[r])) {
        codes[r] = std::numeric_limits<double>::quiet_NaN();
      } else {
        codes[r] = static_cast<double>(im.mapping.at(values[r]));
      }
    }

    ColumnSchema cs = table.schema().columns[col];
    cs.indexed = true;
    out = out.with_column(std::move(cs), ColumnData(std::move(codes)));
    maps.push_back(std::move(im));
  }
  return {std::move(out), std::move(maps)};
}

inline nlohmann::ordered_json index_maps_to_json(const std::vector<IndexMap>& maps) {
  nlohmann::ordered_json j = nlohmann::ordered_json::object();
  for (const auto& m : maps) {
    nlohmann::ordered_json jm = nlohmann::ordered_json::object();
    for (const auto& name : m.by_code()) jm[name] = m.mapping.at(name);
    j[m.column] = std::move(jm);
  }
  return j;
}

// ---------------------------------------------------------------------------
// Duplicate removal
// ---------------------------------------------------------------------------

namespace detail {

// Row identity key over the non-excluded columns; cells are length-prefixed
// so no separator can collide.
inline std::string row_key(const FlowTable& t, size_t row,
                           const std::vector<size_t>& cols) {
  std::string key;
  for (size_t c : cols) {
    std::string cell = t.cell_text(row, c);
    key += std::to_string(cell.size());
    key += ':';
    key += cell;
  }
  return key;
}

}  // namespace detail

struct DedupResult {
  FlowTable table;
  size_t removed_count = 0;
};

/// Removes rows equal to an earlier row across all non-excluded columns,
/// keeping the first occurrence.
inline DedupResult drop_duplicates(const FlowTable& table) {
  const auto cols = table.non_excluded_columns();
  std::unordered_set<std::string> seen;
  seen.reserve(table.row_count());
  std::vector<size_t> keep;
  keep.reserve(table.row_count());
  for (size_t r = 0; r < table.row_count(); ++r) {
    if (seen.insert(detail::row_key(table, r, cols)).second) keep.push_back(r);
  }
  size_t removed = table.row_count() - keep.size();
  if (removed == 0) return {table, 0};
  return {table.take(keep), removed};
}

// ---------------------------------------------------------------------------
// Missing-value removal
// ---------------------------------------------------------------------------

// Dropped-row counts grouped by subcategory-level class name.
using MissingReport = std::map<std::string, int64_t>;

struct MissingResult {
  FlowTable table;
  MissingReport report;
};

/// Deletes every row with a missing value in any non-excluded column and
/// reports the dropped rows per class.
inline MissingResult drop_missing(const FlowTable& table) {
  const auto cols = table.non_excluded_columns();
  const auto keys = subcategory_keys(table);
  std::vector<size_t> keep;
  keep.reserve(table.row_count());
  MissingReport report;
  for (size_t r = 0; r < table.row_count(); ++r) {
    bool missing = false;
    for (size_t c : cols) {
      if (table.is_missing(r, c)) {
        missing = true;
        break;
      }
    }
    if (missing) {
      report[keys[r]]++;
    } else {
      keep.push_back(r);
    }
  }
  if (keep.empty() && table.row_count() > 0) {
    std::cerr << "warning: drop_missing removed every row ("
              << table.row_count() << ")\n";
  }
  if (keep.size() == table.row_count()) return {table, {}};
  return {table.take(keep), std::move(report)};
}

inline nlohmann::ordered_json missing_report_to_json(const MissingReport& report) {
  nlohmann::ordered_json j = nlohmann::ordered_json::object();
  for (const auto& [cls, count] : report) j[cls] = count;
  return j;
}

// ---------------------------------------------------------------------------
// Min-max normalization
// ---------------------------------------------------------------------------

// Per-column fit ranges; fitted on training data only and reused to
// transform test data.
struct NormalizationParams {
  std::map<std::string, std::pair<double, double>> by_column;  // name -> (min, max)

  nlohmann::ordered_json to_json() const {
    nlohmann::ordered_json j = nlohmann::ordered_json::object();
    for (const auto& [name, mm] : by_column) {
      j[name] = {{"min", mm.first}, {"max", mm.second}};
    }
    return j;
  }

  static NormalizationParams from_json(const nlohmann::json& j) {
    NormalizationParams p;
    for (auto it = j.begin(); it != j.end(); ++it) {
      p.by_column[it.key()] = {it.value().at("min").get<double>(),
                               it.value().at("max").get<double>()};
    }
    return p;
  }
};

struct NormalizeResult {
  FlowTable table;
  NormalizationParams params;
};

/// Rescales the named numeric columns to [0, 1]. Without params the ranges
/// are fitted (column min -> 0, max -> 1, constant columns -> 0); with
/// params the stored ranges are applied and out-of-range values are clamped
/// into [0, 1].
inline NormalizeResult min_max_normalize(
    const FlowTable& table, const std::vector<std::string>& numeric_cols,
    const std::optional<NormalizationParams>& params = std::nullopt) {
  FlowTable out = table;
  NormalizationParams fitted;

  for (const auto& name : numeric_cols) {
    const int col = table.require(name);
    const auto& values = table.numeric(col);

    double lo, hi;
    if (params) {
      auto it = params->by_column.find(name);
      if (it == params->by_column.end()) {
        throw ConfigError("normalization params missing column \"" + name + "\"");
      }
      lo = it->second.first;
      hi = it->second.second;
    } else {
      lo = std::numeric_limits<double>::infinity();
      hi = -std::numeric_limits<double>::infinity();
      for (double v : values) {
        if (std::isnan(v)) continue;
        lo = std::min(lo, v);
        hi = std::max(hi, v);
      }
      if (lo > hi) lo = hi = 0.0;  // all-missing or empty column
    }
    fitted.by_column[name] = {lo, hi};

    std::vector<double> scaled(values.size());
    const double range = hi - lo;
    for (size_t r = 0; r < values.size(); ++r) {
      double v = values[r];
      if (std::isnan(v)) {
        scaled[r] = v;
        continue;
      }
      double s = range > 0.0 ? (v - lo) / range : 0.0;
      if (params) s = std::clamp(s, 0.0, 1.0);
      scaled[r] = s;
    }
    out = out.with_column(table.schema().columns[col], ColumnData(std::move(scaled)));
  }
  return {std::move(out), params ? *params : std::move(fitted)};
}

// ---------------------------------------------------------------------------
// Undersampling
// ---------------------------------------------------------------------------

// Seeded per-class keep ratios. A plan can instead carry a per-class row
// cap, resolved against the observed counts when applied; ratios win when
// both are present for robustness of serialized plans.
struct SamplingPlan {
  std::map<std::string, double> ratios;  // class -> keep ratio in (0, 1]
  int64_t cap = -1;                      // -1 = unset
  uint64_t seed = 0;

  nlohmann::ordered_json to_json() const {
    nlohmann::ordered_json j;
    j["seed"] = seed;
    if (cap >= 0) j["cap"] = cap;
    if (!ratios.empty()) {
      nlohmann::ordered_json r = nlohmann::ordered_json::object();
      for (const auto& [cls, ratio] : ratios) r[cls] = ratio;
      j["ratios"] = std::move(r);
    }
    return j;
  }

  static SamplingPlan from_json(const nlohmann::json& j) {
    SamplingPlan p;
    p.seed = j.value("seed", uint64_t{0});
    p.cap = j.value("cap", int64_t{-1});
    if (j.contains("ratios")) {
      for (auto it = j.at("ratios").begin(); it != j.at("ratios").end(); ++it) {
        p.ratios[it.key()] = it.value().get<double>();
      }
    }
    if (p.cap < 0 && p.ratios.empty()) {
      throw ConfigError("sampling plan needs either \"ratios\" or \"cap\"");
    }
    return p;
  }
};

struct SampleResult {
  FlowTable table;
  std::map<std::string, int64_t> kept_per_class;
};

/// Keeps round(ratio_c * n_c) rows of each class, chosen by seeded uniform
/// sampling without replacement. Row order is preserved; rerunning with the
/// same plan selects the same rows. `keys` gives each row's class (defaults
/// to the subcategory-level class names).
inline SampleResult undersample(const FlowTable& table, const SamplingPlan& plan,
                                std::vector<std::string> keys = {}) {
  if (keys.empty()) keys = subcategory_keys(table);
  if (keys.size() != table.row_count()) {
    throw ConfigError("undersample: one class key per row required");
  }

  std::map<std::string, std::vector<size_t>> by_class;
  for (size_t r = 0; r < keys.size(); ++r) by_class[keys[r]].push_back(r);

  // resolve the effective ratio per class
  std::map<std::string, double> ratios = plan.ratios;
  for (const auto& [cls, rows] : by_class) {
    if (ratios.count(cls)) continue;
    if (plan.cap < 0) {
      throw ConfigError("sampling plan has no ratio for class \"" + cls + "\"");
    }
    ratios[cls] = std::min(1.0, static_cast<double>(plan.cap) /
                                    static_cast<double>(rows.size()));
  }
  for (const auto& [cls, ratio] : ratios) {
    if (!(ratio > 0.0) || ratio > 1.0) {
      throw ConfigError("sampling ratio for class \"" + cls +
                        "\" must be in (0, 1]");
    }
  }

  Rng rng(plan.seed);
  std::vector<size_t> kept;
  std::map<std::string, int64_t> kept_per_class;
  for (const auto& [cls, rows] : by_class) {  // sorted class order
    const auto k = static_cast<size_t>(
        std::llround(ratios.at(cls) * static_cast<double>(rows.size())));
    auto chosen = rng.sample_without_replacement(rows, k);
    kept_per_class[cls] = static_cast<int64_t>(chosen.size());
    kept.insert(kept.end(), chosen.begin(), chosen.end());
  }
  std::sort(kept.begin(), kept.end());
  return {table.take(kept), std::move(kept_per_class)};
}

// ---------------------------------------------------------------------------
// Train/test split and k-fold assignment
// ---------------------------------------------------------------------------

namespace detail {

inline std::vector<std::vector<size_t>> rows_by_class(const FlowTable& table,
                                                      const std::string& target_col) {
  const std::vector<int> codes = class_codes(table, target_col);
  std::vector<std::vector<size_t>> groups;
  for (size_t r = 0; r < codes.size(); ++r) {
    const auto cls = static_cast<size_t>(codes[r]);
    if (cls >= groups.size()) groups.resize(cls + 1);
    groups[cls].push_back(r);
  }
  return groups;
}

}  // namespace detail

struct SplitResult {
  FlowTable train;
  FlowTable test;
};

/// Seeded disjoint/exhaustive split. Train size is round(fraction * n)
/// (per class when stratified), clamped so neither side is empty.
inline SplitResult split_train_test(const FlowTable& table, double train_fraction,
                                    uint64_t seed, bool stratified,
                                    const std::string& target_col = kTargetColumn) {
  const size_t n = table.row_count();
  if (n < 2) throw ConfigError("split_train_test: need at least 2 rows");
  if (!(train_fraction > 0.0 && train_fraction < 1.0)) {
    throw ConfigError("train fraction must be in (0, 1)");
  }

  Rng rng(seed);
  std::vector<size_t> train_idx, test_idx;

  auto split_group = [&](std::vector<size_t> rows) {
    rng.shuffle(rows);
    auto k = static_cast<size_t>(
        std::llround(train_fraction * static_cast<double>(rows.size())));
    k = std::min(k, rows.size());
    train_idx.insert(train_idx.end(), rows.begin(), rows.begin() + k);
    test_idx.insert(test_idx.end(), rows.begin() + k, rows.end());
  };

  if (stratified) {
    for (auto& rows : detail::rows_by_class(table, target_col)) {
      if (!rows.empty()) split_group(std::move(rows));
    }
  } else {
    std::vector<size_t> rows(n);
    for (size_t i = 0; i < n; ++i) rows[i] = i;
    split_group(std::move(rows));
  }

  // neither side may end up empty
  if (train_idx.empty()) {
    train_idx.push_back(test_idx.back());
    test_idx.pop_back();
  } else if (test_idx.empty()) {
    test_idx.push_back(train_idx.back());
    train_idx.pop_back();
  }
  std::sort(train_idx.begin(), train_idx.end());
  std::sort(test_idx.begin(), test_idx.end());
  return {table.take(train_idx), table.take(test_idx)};
}

// Per-row fold index in [0, k); folds are disjoint, exhaustive, and their
// sizes differ by at most one.
struct FoldAssignment {
  size_t k = 0;
  std::vector<int> fold_of;

  std::vector<size_t> fold_rows(size_t fold) const {
    std::vector<size_t> out;
    for (size_t r = 0; r < fold_of.size(); ++r) {
      if (static_cast<size_t>(fold_of[r]) == fold) out.push_back(r);
    }
    return out;
  }

  std::vector<size_t> rest_rows(size_t fold) const {
    std::vector<size_t> out;
    for (size_t r = 0; r < fold_of.size(); ++r) {
      if (static_cast<size_t>(fold_of[r]) != fold) out.push_back(r);
    }
    return out;
  }
};

/// Seeded k-fold assignment; stratified mode deals each class round-robin
/// (continuing the fold cursor across classes) so per-class fold counts stay
/// within +/-1 as well.
inline FoldAssignment make_folds(const FlowTable& table, size_t k, uint64_t seed,
                                 bool stratified,
                                 const std::string& target_col = kTargetColumn) {
  const size_t n = table.row_count();
  if (k < 2) throw ConfigError("k-fold: k must be >= 2");
  if (k > n) throw ConfigError("k-fold: k exceeds row count");

  FoldAssignment fa;
  fa.k = k;
  fa.fold_of.assign(n, 0);

  Rng rng(seed);
  size_t cursor = 0;
  auto deal = [&](std::vector<size_t> rows) {
    rng.shuffle(rows);
    for (size_t r : rows) {
      fa.fold_of[r] = static_cast<int>(cursor % k);
      cursor++;
    }
  };

  if (stratified) {
    for (auto& rows : detail::rows_by_class(table, target_col)) {
      if (!rows.empty()) deal(std::move(rows));
    }
  } else {
    std::vector<size_t> rows(n);
    for (size_t i = 0; i < n; ++i) rows[i] = i;
    deal(std::move(rows));
  }
  return fa;
}

}  // namespace flowforge
