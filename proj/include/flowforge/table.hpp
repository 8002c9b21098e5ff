#pragma once

#include <charconv>
#include <cmath>
#include <cstdint>
#include <string>
#include <utility>
#include <variant>
#include <vector>

#include "flowforge/errors.hpp"
#include "flowforge/schema.hpp"

namespace flowforge {

// Name of the integer class column appended by derive_labels. It carries
// kind `excluded` so it can never leak into the feature set.
inline constexpr const char* kTargetColumn = "target";

// One column of values. Numeric columns (and indexed categoricals) hold
// doubles with NaN as the missing marker; pre-indexing string columns hold
// the raw cell text.
using ColumnData = std::variant<std::vector<double>, std::vector<std::string>>;

// Immutable columnar table of flow records. All transforms build new tables;
// a constructed table is safe to share across threads.
class FlowTable {
 public:
  FlowTable() = default;

  FlowTable(TableSchema schema, std::vector<ColumnData> columns)
      : schema_(std::move(schema)), columns_(std::move(columns)) {
    if (schema_.columns.size() != columns_.size()) {
      throw DataError("table construction: schema has " +
                      std::to_string(schema_.columns.size()) + " columns but " +
                      std::to_string(columns_.size()) + " data columns given");
    }
    row_count_ = columns_.empty() ? 0 : column_size(columns_[0]);
    for (size_t i = 1; i < columns_.size(); ++i) {
      if (column_size(columns_[i]) != row_count_) {
        throw DataError("table construction: column \"" + schema_.columns[i].name +
                        "\" length mismatch");
      }
    }
  }

  static FlowTable empty(const TableSchema& schema) {
    std::vector<ColumnData> cols;
    cols.reserve(schema.columns.size());
    for (const auto& c : schema.columns) {
      if (stores_numeric(c)) {
        cols.emplace_back(std::vector<double>{});
      } else {
        cols.emplace_back(std::vector<std::string>{});
      }
    }
    return FlowTable(schema, std::move(cols));
  }

  // Raw string columns are: categorical/label columns not yet indexed.
  static bool stores_numeric(const ColumnSchema& c) {
    return c.kind == ColumnKind::numeric || c.indexed;
  }

  const TableSchema& schema() const { return schema_; }
  size_t row_count() const { return row_count_; }
  size_t column_count() const { return columns_.size(); }

  int find(const std::string& name) const { return schema_.find(name); }
  int require(const std::string& name) const { return schema_.require(name); }

  bool is_numeric(size_t col) const {
    return std::holds_alternative<std::vector<double>>(columns_[col]);
  }

  const std::vector<double>& numeric(size_t col) const {
    if (!is_numeric(col)) {
      throw DataError("column \"" + schema_.columns[col].name +
                      "\" holds strings, expected numeric values");
    }
    return std::get<std::vector<double>>(columns_[col]);
  }

  const std::vector<std::string>& strings(size_t col) const {
    if (is_numeric(col)) {
      throw DataError("column \"" + schema_.columns[col].name +
                      "\" holds numeric values, expected strings");
    }
    return std::get<std::vector<std::string>>(columns_[col]);
  }

  const ColumnData& column(size_t col) const { return columns_[col]; }

  bool is_missing(size_t row, size_t col) const {
    if (is_numeric(col)) return std::isnan(numeric(col)[row]);
    return schema_.is_missing_marker(strings(col)[row]);
  }

  // Canonical cell text; used for CSV output and row-identity keys.
  // Doubles use the shortest round-trip decimal form, missing cells map to
  // the first missing marker (the empty string by default).
  std::string cell_text(size_t row, size_t col) const {
    if (is_numeric(col)) {
      double v = numeric(col)[row];
      if (std::isnan(v)) {
        return schema_.missing_markers.empty() ? "" : schema_.missing_markers[0];
      }
      char buf[32];
      auto res = std::to_chars(buf, buf + sizeof buf, v);
      return std::string(buf, res.ptr);
    }
    return strings(col)[row];
  }

  // New table with the given rows, in the given order.
  FlowTable take(const std::vector<size_t>& rows) const {
    std::vector<ColumnData> out;
    out.reserve(columns_.size());
    for (const auto& cd : columns_) {
      if (std::holds_alternative<std::vector<double>>(cd)) {
        const auto& src = std::get<std::vector<double>>(cd);
        std::vector<double> dst;
        dst.reserve(rows.size());
        for (size_t r : rows) dst.push_back(src[r]);
        out.emplace_back(std::move(dst));
      } else {
        const auto& src = std::get<std::vector<std::string>>(cd);
        std::vector<std::string> dst;
        dst.reserve(rows.size());
        for (size_t r : rows) dst.push_back(src[r]);
        out.emplace_back(std::move(dst));
      }
    }
    return FlowTable(schema_, std::move(out));
  }

  // New table with one column replaced (or appended when absent).
  FlowTable with_column(ColumnSchema cs, ColumnData data) const {
    TableSchema schema = schema_;
    std::vector<ColumnData> cols = columns_;
    int idx = schema.find(cs.name);
    if (idx >= 0) {
      schema.columns[idx] = std::move(cs);
      cols[idx] = std::move(data);
    } else {
      schema.columns.push_back(std::move(cs));
      cols.push_back(std::move(data));
    }
    return FlowTable(std::move(schema), std::move(cols));
  }

  FlowTable without_column(const std::string& name) const {
    int idx = schema_.find(name);
    if (idx < 0) return *this;
    TableSchema schema = schema_;
    std::vector<ColumnData> cols = columns_;
    schema.columns.erase(schema.columns.begin() + idx);
    cols.erase(cols.begin() + idx);
    return FlowTable(std::move(schema), std::move(cols));
  }

  // Candidate feature columns: numeric or categorical kind, never labels,
  // never excluded columns.
  std::vector<size_t> feature_columns() const {
    std::vector<size_t> out;
    for (size_t i = 0; i < schema_.columns.size(); ++i) {
      ColumnKind k = schema_.columns[i].kind;
      if (k == ColumnKind::numeric || k == ColumnKind::categorical) out.push_back(i);
    }
    return out;
  }

  std::vector<size_t> non_excluded_columns() const {
    std::vector<size_t> out;
    for (size_t i = 0; i < schema_.columns.size(); ++i) {
      if (schema_.columns[i].kind != ColumnKind::excluded) out.push_back(i);
    }
    return out;
  }

  bool operator==(const FlowTable& other) const {
    if (schema_ != other.schema_ || row_count_ != other.row_count_) return false;
    for (size_t c = 0; c < columns_.size(); ++c) {
      if (is_numeric(c) != other.is_numeric(c)) return false;
      if (is_numeric(c)) {
        const auto& a = numeric(c);
        const auto& b = other.numeric(c);
        for (size_t r = 0; r < row_count_; ++r) {
          // NaN cells (missing) compare equal to each other
          if (a[r] != b[r] && !(std::isnan(a[r]) && std::isnan(b[r]))) return false;
        }
      } else if (strings(c) != other.strings(c)) {
        return false;
      }
    }
    return true;
  }

 private:
  static size_t column_size(const ColumnData& cd) {
    return std::visit([](const auto& v) { return v.size(); }, cd);
  }

  TableSchema schema_;
  std::vector<ColumnData> columns_;
  size_t row_count_ = 0;
};

// Integer class codes of a target column; rejects missing or fractional
// values before they can reach a cast.
inline std::vector<int> class_codes(const FlowTable& table,
                                    const std::string& target_col) {
  const int col = table.require(target_col);
  const auto& vals = table.numeric(col);
  std::vector<int> codes(vals.size());
  for (size_t i = 0; i < vals.size(); ++i) {
    const double v = vals[i];
    if (std::isnan(v) || v != std::floor(v) || v < 0) {
      throw DataError("column \"" + target_col + "\" is not integer-encoded at row " +
                      std::to_string(i));
    }
    codes[i] = static_cast<int>(v);
  }
  return codes;
}

// Per-class row counts of an integer-encoded column. n_classes == 0 infers
// the class count as max(code) + 1.
inline std::vector<int64_t> class_counts(const FlowTable& table,
                                         const std::string& target_col,
                                         size_t n_classes = 0) {
  const int col = table.require(target_col);
  if (!table.is_numeric(col)) {
    throw DataError("class_counts: column \"" + target_col +
                    "\" is not integer-encoded");
  }
  const auto& vals = table.numeric(col);
  std::vector<int64_t> counts(n_classes, 0);
  for (double v : vals) {
    if (std::isnan(v) || v != std::floor(v) || v < 0) {
      throw DataError("class_counts: column \"" + target_col +
                      "\" holds a non-integer value");
    }
    size_t cls = static_cast<size_t>(v);
    if (cls >= counts.size()) counts.resize(cls + 1, 0);
    counts[cls]++;
  }
  return counts;
}

}  // namespace flowforge
