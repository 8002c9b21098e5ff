#pragma once

#include <cmath>
#include <cstdint>
#include <fstream>
#include <map>
#include <string>
#include <vector>

#include <json.hpp>

#include "flowforge/csv.hpp"
#include "flowforge/labels.hpp"
#include "flowforge/rng.hpp"
#include "flowforge/table.hpp"

namespace flowforge {

// Desk-scale stand-in for a real flow capture: every class draws each
// feature from its own bin-probability vector, with optional injected
// missing cells and duplicate rows to exercise the cleaning stages.
struct SyntheticClassSpec {
  std::string name;                             // e.g. "DDoS_TCP", "Normal"
  int64_t rows = 0;
  int64_t missing_rows = 0;
  std::vector<std::vector<double>> bin_probs;   // [feature][bin], each sums to 1
};

struct SyntheticSpec {
  uint64_t seed = 0;
  int num_bins = 16;
  std::vector<std::string> features;
  std::vector<std::string> categorical;                  // subset of features
  std::map<std::string, std::pair<double, double>> scales;  // numeric output range
  std::vector<SyntheticClassSpec> classes;
  int64_t duplicate_rows = 0;

  bool is_categorical(const std::string& f) const {
    return std::find(categorical.begin(), categorical.end(), f) != categorical.end();
  }

  void validate() const {
    if (num_bins < 2) throw ConfigError("synthetic: num_bins must be >= 2");
    if (duplicate_rows < 0) throw ConfigError("synthetic: duplicate_rows must be >= 0");
    for (const auto& c : classes) {
      if (c.rows < 0 || c.missing_rows < 0 || c.missing_rows > c.rows) {
        throw ConfigError("synthetic class \"" + c.name +
                          "\": need 0 <= missing_rows <= rows");
      }
      if (c.bin_probs.size() != features.size()) {
        throw ConfigError("synthetic class \"" + c.name +
                          "\": one bin-probability vector per feature required");
      }
      for (const auto& probs : c.bin_probs) {
        if (probs.size() != static_cast<size_t>(num_bins)) {
          throw ConfigError("synthetic class \"" + c.name +
                            "\": probability vectors must have num_bins entries");
        }
        double sum = 0.0;
        for (double p : probs) {
          if (p < 0.0) throw ConfigError("synthetic: negative bin probability");
          sum += p;
        }
        if (std::abs(sum - 1.0) > 1e-9) {
          throw ConfigError("synthetic class \"" + c.name +
                            "\": bin probabilities must sum to 1");
        }
      }
    }
  }
};

namespace detail {

// L1 peak profile: p(b) proportional to exp(-sharpness * |b - peak|).
inline std::vector<double> peak_probs(int peak, int num_bins, double sharpness) {
  std::vector<double> p(num_bins);
  double sum = 0.0;
  for (int b = 0; b < num_bins; ++b) {
    p[b] = std::exp(-sharpness * std::abs(b - peak));
    sum += p[b];
  }
  for (double& v : p) v /= sum;
  return p;
}

inline std::string categorical_token(const std::string& column, int bin) {
  static const std::vector<std::string> proto = {"tcp",  "udp",  "arp", "icmp",
                                                 "ipv6", "rarp", "igmp", "llc"};
  static const std::vector<std::string> state = {"CON", "INT", "RST", "FIN",
                                                 "REQ", "ACC", "URP", "ECO"};
  const std::vector<std::string>* base = nullptr;
  if (column == "proto") base = &proto;
  if (column == "state") base = &state;
  if (base && static_cast<size_t>(bin) < base->size()) return (*base)[bin];
  return "v" + std::to_string(bin);
}

inline std::pair<std::string, std::string> split_class_name(const std::string& name) {
  auto pos = name.find('_');
  if (pos == std::string::npos) return {name, name};  // e.g. Normal/Normal
  return {name.substr(0, pos), name.substr(pos + 1)};
}

}  // namespace detail

inline SyntheticSpec synthetic_spec_from_json(const nlohmann::json& j) {
  SyntheticSpec spec;
  spec.seed = j.value("seed", uint64_t{0});
  spec.num_bins = j.value("num_bins", 16);
  spec.features = j.at("features").get<std::vector<std::string>>();
  if (j.contains("categorical")) {
    spec.categorical = j.at("categorical").get<std::vector<std::string>>();
  }
  if (j.contains("scales")) {
    for (auto it = j.at("scales").begin(); it != j.at("scales").end(); ++it) {
      spec.scales[it.key()] = {it.value().at(0).get<double>(),
                               it.value().at(1).get<double>()};
    }
  }
  spec.duplicate_rows = j.value("duplicate_rows", int64_t{0});
  for (const auto& jc : j.at("classes")) {
    SyntheticClassSpec c;
    c.name = jc.at("name").get<std::string>();
    c.rows = jc.at("rows").get<int64_t>();
    c.missing_rows = jc.value("missing_rows", int64_t{0});
    if (jc.contains("bin_probs")) {
      c.bin_probs = jc.at("bin_probs").get<std::vector<std::vector<double>>>();
    } else {
      const auto peaks = jc.at("peaks").get<std::vector<int>>();
      const double sharpness = jc.value("sharpness", 1.0);
      if (peaks.size() != spec.features.size()) {
        throw ConfigError("synthetic class \"" + c.name + "\": one peak per feature");
      }
      for (int p : peaks) {
        c.bin_probs.push_back(detail::peak_probs(p, spec.num_bins, sharpness));
      }
    }
    spec.classes.push_back(std::move(c));
  }
  spec.validate();
  return spec;
}

inline SyntheticSpec load_synthetic_spec(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open synthetic spec: " + path);
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    throw DataError("invalid synthetic spec JSON in " + path + ": " + e.what());
  }
  return synthetic_spec_from_json(j);
}

/// Generates the seeded synthetic flow table: address columns (excluded),
/// the spec'd feature columns, and label/category/subcategory columns
/// derived from each class name. Identical spec and seed give identical
/// rows, so written CSVs are byte-stable.
inline FlowTable generate_synthetic(const SyntheticSpec& spec) {
  spec.validate();

  TableSchema schema;
  schema.columns.push_back({"saddr", ColumnKind::excluded, false, false});
  schema.columns.push_back({"daddr", ColumnKind::excluded, false, false});
  for (const auto& f : spec.features) {
    schema.columns.push_back({f,
                              spec.is_categorical(f) ? ColumnKind::categorical
                                                     : ColumnKind::numeric,
                              true, false});
  }
  schema.columns.push_back({"label", ColumnKind::label_binary, false, false});
  schema.columns.push_back({"category", ColumnKind::label_category, false, false});
  schema.columns.push_back({"subcategory", ColumnKind::label_subcategory, false, false});

  const size_t d = spec.features.size();
  size_t total = 0;
  for (const auto& c : spec.classes) total += static_cast<size_t>(c.rows);

  std::vector<std::string> saddr(total), daddr(total);
  std::vector<std::vector<double>> numeric(d);
  std::vector<std::vector<std::string>> tokens(d);
  std::vector<size_t> numeric_feature_idx;
  for (size_t f = 0; f < d; ++f) {
    if (spec.is_categorical(spec.features[f])) {
      tokens[f].resize(total);
    } else {
      numeric[f].resize(total);
      numeric_feature_idx.push_back(f);
    }
  }
  std::vector<std::string> label(total), category(total), subcategory(total);

  Rng rng(spec.seed);
  size_t at = 0;
  for (const auto& cls : spec.classes) {
    const auto [cat, sub] = detail::split_class_name(cls.name);
    const bool attack = detail::lower(cat) != "normal";
    const size_t begin = at;
    for (int64_t i = 0; i < cls.rows; ++i, ++at) {
      saddr[at] = "192.168.100." + std::to_string(1 + rng.below(254));
      daddr[at] = "192.168.217." + std::to_string(1 + rng.below(254));
      for (size_t f = 0; f < d; ++f) {
        const int bin = static_cast<int>(rng.discrete(cls.bin_probs[f]));
        if (spec.is_categorical(spec.features[f])) {
          tokens[f][at] = detail::categorical_token(spec.features[f], bin);
        } else {
          double lo = 0.0, hi = 1.0;
          auto it = spec.scales.find(spec.features[f]);
          if (it != spec.scales.end()) {
            lo = it->second.first;
            hi = it->second.second;
          }
          const double frac = (bin + rng.uniform01()) / spec.num_bins;
          numeric[f][at] = lo + frac * (hi - lo);
        }
      }
      label[at] = attack ? "attack" : "normal";
      category[at] = cat;
      subcategory[at] = sub;
    }
    // blank one feature cell in the first missing_rows rows of the block
    for (int64_t i = 0; i < cls.missing_rows; ++i) {
      const size_t row = begin + static_cast<size_t>(i);
      if (!numeric_feature_idx.empty()) {
        const size_t f = numeric_feature_idx[rng.below(numeric_feature_idx.size())];
        numeric[f][row] = std::numeric_limits<double>::quiet_NaN();
      } else if (d > 0) {
        tokens[0][row] = "";
      }
    }
  }

  std::vector<ColumnData> cols;
  cols.emplace_back(std::move(saddr));
  cols.emplace_back(std::move(daddr));
  for (size_t f = 0; f < d; ++f) {
    if (spec.is_categorical(spec.features[f])) {
      cols.emplace_back(std::move(tokens[f]));
    } else {
      cols.emplace_back(std::move(numeric[f]));
    }
  }
  cols.emplace_back(std::move(label));
  cols.emplace_back(std::move(category));
  cols.emplace_back(std::move(subcategory));
  FlowTable table(schema, std::move(cols));

  // shuffle rows, then append duplicates of clean rows at the end so the
  // first occurrence always survives deduplication
  std::vector<size_t> order(total);
  for (size_t i = 0; i < total; ++i) order[i] = i;
  rng.shuffle(order);

  if (spec.duplicate_rows > 0) {
    std::vector<size_t> clean;
    clean.reserve(total);
    const auto scan = table.non_excluded_columns();
    for (size_t r : order) {
      bool missing = false;
      for (size_t c : scan) {
        if (table.is_missing(r, c)) { missing = true; break; }
      }
      if (!missing) clean.push_back(r);
    }
    if (clean.empty() && total > 0) {
      throw ConfigError("synthetic: cannot inject duplicates, every row has missing cells");
    }
    for (int64_t i = 0; i < spec.duplicate_rows && !clean.empty(); ++i) {
      order.push_back(clean[rng.below(clean.size())]);
    }
  }
  return table.take(order);
}

}  // namespace flowforge
