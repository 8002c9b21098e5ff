#pragma once

#include <algorithm>
#include <cctype>
#include <cmath>
#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "flowforge/table.hpp"

namespace flowforge {

enum class TaskVariant { binary, main_category, sub_category };

inline const char* to_string(TaskVariant v) {
  switch (v) {
    case TaskVariant::binary: return "binary";
    case TaskVariant::main_category: return "main_category";
    case TaskVariant::sub_category: return "sub_category";
  }
  return "?";
}

inline TaskVariant task_from_string(const std::string& s) {
  if (s == "binary") return TaskVariant::binary;
  if (s == "main_category" || s == "main") return TaskVariant::main_category;
  if (s == "sub_category" || s == "sub") return TaskVariant::sub_category;
  throw ConfigError("unknown task: \"" + s + "\" (expected binary|main|sub)");
}

// One of the three labelings: attack-vs-normal, 5 main categories, or the
// 11 concatenated subcategory classes. class_names is bound by derive_labels
// (fixed up front only for the binary task).
struct LabelTask {
  TaskVariant variant = TaskVariant::binary;
  std::vector<std::string> class_names;

  size_t num_classes() const { return class_names.size(); }
};

// Class index assignment rule: most frequent name first, ties broken by
// lexicographically ascending name.
inline std::vector<std::string> order_by_frequency(
    const std::map<std::string, int64_t>& freq) {
  std::vector<std::pair<std::string, int64_t>> items(freq.begin(), freq.end());
  std::stable_sort(items.begin(), items.end(), [](const auto& a, const auto& b) {
    if (a.second != b.second) return a.second > b.second;
    return a.first < b.first;
  });
  std::vector<std::string> names;
  names.reserve(items.size());
  for (auto& [name, count] : items) names.push_back(name);
  return names;
}

namespace detail {

inline std::string lower(std::string s) {
  for (char& c : s) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  return s;
}

// Attack/normal decision for a raw binary-label token: "normal" (any case)
// and tokens that parse to numeric zero count as normal, everything else is
// an attack.
inline bool token_is_attack(const std::string& token) {
  if (lower(token) == "normal") return false;
  char* end = nullptr;
  double v = std::strtod(token.c_str(), &end);
  if (end != token.c_str() && *end == '\0') return v != 0.0;
  return true;
}

// Subcategory class name: mainCategory + "_" + subCategory, collapsing to
// the bare category when the subcategory is empty or repeats it (BoT-IoT
// normal rows carry category "Normal" / subcategory "Normal").
inline std::string subcategory_class_name(const std::string& category,
                                          const std::string& subcategory) {
  if (subcategory.empty() || subcategory == category) return category;
  return category + "_" + subcategory;
}

inline const std::vector<std::string>& require_string_label(const FlowTable& t,
                                                            ColumnKind kind) {
  int col = t.schema().find_kind(kind);
  if (col < 0) {
    throw DataError(std::string("missing required label column of kind ") +
                    to_string(kind));
  }
  if (t.is_numeric(col)) {
    throw DataError(std::string("label column \"") + t.schema().columns[col].name +
                    "\" was already integer-indexed; class names are unavailable");
  }
  return t.strings(col);
}

}  // namespace detail

// Per-row class names for the subcategory labeling; this is also the keying
// used by the missing-value report and by undersampling plans. Falls back to
// the binary label column when no category columns exist, and to "unlabeled"
// when there are no usable label columns at all.
inline std::vector<std::string> subcategory_keys(const FlowTable& t) {
  const auto& schema = t.schema();
  int cat = schema.find_kind(ColumnKind::label_category);
  int sub = schema.find_kind(ColumnKind::label_subcategory);
  std::vector<std::string> keys(t.row_count());
  if (cat >= 0 && !t.is_numeric(cat)) {
    const auto& cats = t.strings(cat);
    const std::vector<std::string>* subs =
        (sub >= 0 && !t.is_numeric(sub)) ? &t.strings(sub) : nullptr;
    for (size_t r = 0; r < keys.size(); ++r) {
      keys[r] = detail::subcategory_class_name(cats[r], subs ? (*subs)[r] : "");
    }
    return keys;
  }
  int bin = schema.find_kind(ColumnKind::label_binary);
  if (bin >= 0) {
    for (size_t r = 0; r < keys.size(); ++r) keys[r] = t.cell_text(r, bin);
    return keys;
  }
  for (auto& k : keys) k = "unlabeled";
  return keys;
}

// Appends the integer target column for the given task and binds the task's
// class names. Binary targets are forced to normal=0 / attack=1; multiclass
// indices follow the frequency-descending rule. Re-derivation replaces any
// existing target column, so the operation is idempotent.
inline FlowTable derive_labels(const FlowTable& table, LabelTask& task) {
  std::vector<double> target(table.row_count());

  if (task.variant == TaskVariant::binary) {
    int col = table.schema().find_kind(ColumnKind::label_binary);
    if (col < 0) throw DataError("missing required label column of kind label-binary");
    task.class_names = {"normal", "attack"};
    if (table.is_numeric(col)) {
      const auto& vals = table.numeric(col);
      for (size_t r = 0; r < vals.size(); ++r) {
        if (std::isnan(vals[r])) {
          throw DataError("binary label column has missing values; drop them first");
        }
        target[r] = vals[r] != 0.0 ? 1.0 : 0.0;
      }
    } else {
      const auto& vals = table.strings(col);
      for (size_t r = 0; r < vals.size(); ++r) {
        target[r] = detail::token_is_attack(vals[r]) ? 1.0 : 0.0;
      }
    }
  } else {
    std::vector<std::string> names;
    if (task.variant == TaskVariant::main_category) {
      names = detail::require_string_label(table, ColumnKind::label_category);
    } else {
      detail::require_string_label(table, ColumnKind::label_category);
      names = subcategory_keys(table);
    }
    std::map<std::string, int64_t> freq;
    for (const auto& n : names) freq[n]++;
    task.class_names = order_by_frequency(freq);
    std::map<std::string, double> code;
    for (size_t i = 0; i < task.class_names.size(); ++i) {
      code[task.class_names[i]] = static_cast<double>(i);
    }
    for (size_t r = 0; r < names.size(); ++r) target[r] = code[names[r]];
  }

  ColumnSchema cs;
  cs.name = kTargetColumn;
  cs.kind = ColumnKind::excluded;  // never a feature
  cs.nullable = false;
  cs.indexed = true;
  return table.with_column(std::move(cs), ColumnData(std::move(target)));
}

}  // namespace flowforge
