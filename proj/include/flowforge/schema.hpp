#pragma once

#include <algorithm>
#include <fstream>
#include <string>
#include <unordered_set>
#include <vector>

#include <json.hpp>

#include "flowforge/errors.hpp"

namespace flowforge {

enum class ColumnKind {
  numeric,
  categorical,
  label_binary,
  label_category,
  label_subcategory,
  excluded,
};

inline const char* to_string(ColumnKind k) {
  switch (k) {
    case ColumnKind::numeric: return "numeric";
    case ColumnKind::categorical: return "categorical";
    case ColumnKind::label_binary: return "label-binary";
    case ColumnKind::label_category: return "label-category";
    case ColumnKind::label_subcategory: return "label-subcategory";
    case ColumnKind::excluded: return "excluded";
  }
  return "?";
}

inline ColumnKind column_kind_from_string(const std::string& s) {
  if (s == "numeric") return ColumnKind::numeric;
  if (s == "categorical") return ColumnKind::categorical;
  if (s == "label-binary") return ColumnKind::label_binary;
  if (s == "label-category") return ColumnKind::label_category;
  if (s == "label-subcategory") return ColumnKind::label_subcategory;
  if (s == "excluded") return ColumnKind::excluded;
  throw ConfigError("unknown column kind: \"" + s + "\"");
}

inline bool is_label_kind(ColumnKind k) {
  return k == ColumnKind::label_binary || k == ColumnKind::label_category ||
         k == ColumnKind::label_subcategory;
}

struct ColumnSchema {
  std::string name;
  ColumnKind kind = ColumnKind::numeric;
  bool nullable = true;
  // Set once a categorical/label column has been string-indexed; such
  // columns are stored (and serialized) as integer codes.
  bool indexed = false;

  bool operator==(const ColumnSchema&) const = default;
};

// Schema for a whole table plus the CSV conventions attached to it.
struct TableSchema {
  std::vector<ColumnSchema> columns;
  // Cell texts treated as missing in string columns; numeric cells are
  // missing when they fail to parse or match one of these.
  std::vector<std::string> missing_markers{"", "nan", "NaN"};

  bool operator==(const TableSchema&) const = default;

  size_t size() const { return columns.size(); }

  int find(const std::string& name) const {
    for (size_t i = 0; i < columns.size(); ++i) {
      if (columns[i].name == name) return static_cast<int>(i);
    }
    return -1;
  }

  int require(const std::string& name) const {
    int idx = find(name);
    if (idx < 0) throw DataError("schema has no column named \"" + name + "\"");
    return idx;
  }

  bool is_missing_marker(const std::string& cell) const {
    return std::find(missing_markers.begin(), missing_markers.end(), cell) !=
           missing_markers.end();
  }

  // Unique names; exactly one label-binary column; at most one each of
  // label-category / label-subcategory.
  void validate() const {
    std::unordered_set<std::string> seen;
    int n_binary = 0, n_category = 0, n_subcategory = 0;
    for (const auto& c : columns) {
      if (!seen.insert(c.name).second) {
        throw ConfigError("duplicate column name in schema: \"" + c.name + "\"");
      }
      switch (c.kind) {
        case ColumnKind::label_binary: n_binary++; break;
        case ColumnKind::label_category: n_category++; break;
        case ColumnKind::label_subcategory: n_subcategory++; break;
        default: break;
      }
    }
    if (n_binary != 1) {
      throw ConfigError("schema must contain exactly one label-binary column, found " +
                        std::to_string(n_binary));
    }
    if (n_category > 1 || n_subcategory > 1) {
      throw ConfigError("schema may contain at most one label-category and one "
                        "label-subcategory column");
    }
  }

  int find_kind(ColumnKind k) const {
    for (size_t i = 0; i < columns.size(); ++i) {
      if (columns[i].kind == k) return static_cast<int>(i);
    }
    return -1;
  }
};

inline TableSchema schema_from_json(const nlohmann::json& j) {
  TableSchema s;
  const nlohmann::json& cols = j.is_array() ? j : j.at("columns");
  for (const auto& jc : cols) {
    ColumnSchema c;
    c.name = jc.at("name").get<std::string>();
    c.kind = column_kind_from_string(jc.at("kind").get<std::string>());
    c.nullable = jc.value("nullable", true);
    c.indexed = jc.value("indexed", false);
    s.columns.push_back(std::move(c));
  }
  if (j.is_object() && j.contains("missing_markers")) {
    s.missing_markers = j.at("missing_markers").get<std::vector<std::string>>();
  }
  return s;
}

inline nlohmann::ordered_json schema_to_json(const TableSchema& s) {
  nlohmann::ordered_json j;
  j["columns"] = nlohmann::ordered_json::array();
  for (const auto& c : s.columns) {
    nlohmann::ordered_json jc;
    jc["name"] = c.name;
    jc["kind"] = to_string(c.kind);
    jc["nullable"] = c.nullable;
    if (c.indexed) jc["indexed"] = true;
    j["columns"].push_back(std::move(jc));
  }
  j["missing_markers"] = s.missing_markers;
  return j;
}

inline TableSchema load_schema(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open schema file: " + path);
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    throw DataError("invalid schema JSON in " + path + ": " + e.what());
  }
  return schema_from_json(j);
}

inline void save_schema(const TableSchema& s, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw DataError("cannot write schema file: " + path);
  out << schema_to_json(s).dump(2) << "\n";
}

}  // namespace flowforge
