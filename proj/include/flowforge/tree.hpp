#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "flowforge/executor.hpp"
#include "flowforge/rng.hpp"
#include "flowforge/table.hpp"

namespace flowforge {

// Executor knobs shared by all training entry points.
struct ExecConfig {
  size_t partitions = 8;
  unsigned workers = 0;  // 0 = hardware concurrency
};

/// Gini impurity 1 - sum((count_i / total)^2) of a class histogram.
inline double gini_impurity(const std::vector<int64_t>& class_counts) {
  int64_t total = 0;
  for (int64_t c : class_counts) total += c;
  if (total <= 0) throw DataError("gini_impurity: all-zero class counts");
  double sum_sq = 0.0;
  for (int64_t c : class_counts) {
    const double p = static_cast<double>(c) / static_cast<double>(total);
    sum_sq += p * p;
  }
  return 1.0 - sum_sq;
}

/// Split candidates for one feature: up to max_bins-1 ascending thresholds.
/// Few distinct values give midpoints between neighbours; otherwise the
/// thresholds sit at approximate quantiles of the sorted training values.
/// A constant feature yields no boundaries and is never splittable.
inline std::vector<double> compute_bin_boundaries(std::vector<double> values,
                                                  int max_bins) {
  if (max_bins < 2) throw ConfigError("max_bins must be >= 2");
  std::sort(values.begin(), values.end());
  std::vector<double> distinct;
  for (double v : values) {
    if (distinct.empty() || v != distinct.back()) distinct.push_back(v);
  }
  if (distinct.size() < 2) return {};

  std::vector<double> bounds;
  if (distinct.size() <= static_cast<size_t>(max_bins)) {
    bounds.reserve(distinct.size() - 1);
    for (size_t i = 0; i + 1 < distinct.size(); ++i) {
      bounds.push_back(distinct[i] + (distinct[i + 1] - distinct[i]) / 2.0);
    }
    return bounds;
  }
  const size_t n = values.size();
  for (int i = 1; i < max_bins; ++i) {
    double q = values[n * static_cast<size_t>(i) / static_cast<size_t>(max_bins)];
    if (bounds.empty() || q > bounds.back()) bounds.push_back(q);
  }
  return bounds;
}

// bin(x) = number of boundaries strictly below x; split at boundary j sends
// bins 0..j (x <= boundary[j]) to the left child.
inline int bin_of_value(double x, const std::vector<double>& boundaries) {
  return static_cast<int>(std::lower_bound(boundaries.begin(), boundaries.end(), x) -
                          boundaries.begin());
}

struct TreeParams {
  int max_depth = 5;
  int max_bins = 32;
  int min_instances_per_node = 1;
  double min_info_gain = 0.0;
};

// Binary node: internal nodes carry (feature, threshold, children), leaves a
// predicted class plus the training class histogram.
struct TreeNode {
  int feature = -1;  // -1 = leaf
  double threshold = 0.0;
  int left = -1;
  int right = -1;
  int prediction = 0;
  std::vector<int64_t> histogram;

  bool is_leaf() const { return feature < 0; }
};

struct DecisionTree {
  std::vector<TreeNode> nodes;  // nodes[0] is the root
  std::vector<std::vector<double>> boundaries;  // per feature
  size_t n_classes = 0;

  int predict_row(std::span<const double> x) const {
    size_t at = 0;
    while (!nodes[at].is_leaf()) {
      const TreeNode& nd = nodes[at];
      at = x[nd.feature] <= nd.threshold ? nd.left : nd.right;
    }
    return nodes[at].prediction;
  }

  bool operator==(const DecisionTree& other) const {
    if (boundaries != other.boundaries || n_classes != other.n_classes ||
        nodes.size() != other.nodes.size()) {
      return false;
    }
    for (size_t i = 0; i < nodes.size(); ++i) {
      const TreeNode &a = nodes[i], &b = other.nodes[i];
      if (a.feature != b.feature || a.threshold != b.threshold || a.left != b.left ||
          a.right != b.right || a.prediction != b.prediction ||
          a.histogram != b.histogram) {
        return false;
      }
    }
    return true;
  }
};

namespace detail {

// Level-order tree induction over pre-binned features. All statistics are
// exact weighted integer counts aggregated through the partitioned executor,
// which is what makes the result independent of the partition count.
class TreeBuilder {
 public:
  TreeBuilder(const std::vector<std::vector<uint8_t>>& binned,
              const std::vector<std::vector<double>>& boundaries,
              const std::vector<int>& target, size_t n_classes,
              const std::vector<uint32_t>& weights, const TreeParams& params,
              const FlowTable& table, const ExecConfig& exec)
      : binned_(binned),
        boundaries_(boundaries),
        target_(target),
        n_classes_(n_classes),
        weights_(weights),
        params_(params),
        table_(table),
        exec_(exec) {}

  // subset_size == 0 or >= feature count: all features at every node.
  DecisionTree build(size_t subset_size, uint64_t subset_seed) {
    const size_t n_features = binned_.size();
    const bool subsample = subset_size > 0 && subset_size < n_features;

    DecisionTree tree;
    tree.boundaries = boundaries_;
    tree.n_classes = n_classes_;

    std::vector<int> all_features(n_features);
    for (size_t f = 0; f < n_features; ++f) all_features[f] = static_cast<int>(f);

    auto subset_for = [&](size_t node_id) {
      if (!subsample) return all_features;
      Rng rng(mix_seed(subset_seed, node_id));
      auto chosen = rng.sample_without_replacement(all_features, subset_size);
      std::sort(chosen.begin(), chosen.end());
      return chosen;
    };

    tree.nodes.emplace_back();
    node_of_row_.assign(target_.size(), 0);

    struct Frontier {
      size_t node;
      int depth;
      std::vector<int> features;
    };
    std::vector<Frontier> frontier{{0, 0, subset_for(0)}};

    while (!frontier.empty()) {
      const LevelStats stats = aggregate_level(frontier);
      std::vector<Frontier> next;
      std::vector<char> goes_deeper(frontier.size(), 0);

      for (size_t i = 0; i < frontier.size(); ++i) {
        Frontier& fr = frontier[i];
        const auto counts = stats.class_counts(i, n_classes_);
        TreeNode& node = tree.nodes[fr.node];
        node.histogram = counts;
        node.prediction = argmax_class(counts);

        // a split is valid when its gain reaches min_info_gain; with the
        // default of 0 a zero-gain split of an impure node is still taken,
        // matching the reference platform's behaviour
        const BestSplit best = choose_split(stats, i, fr);
        if (best.feature >= 0 && best.gain >= params_.min_info_gain &&
            fr.depth < params_.max_depth) {
          const size_t left_id = tree.nodes.size();
          const size_t right_id = left_id + 1;
          node.feature = best.feature;
          node.threshold = boundaries_[best.feature][best.boundary];
          node.left = static_cast<int>(left_id);
          node.right = static_cast<int>(right_id);
          tree.nodes.emplace_back();  // invalidates `node`
          tree.nodes.emplace_back();
          next.push_back({left_id, fr.depth + 1, subset_for(left_id)});
          next.push_back({right_id, fr.depth + 1, subset_for(right_id)});
          goes_deeper[i] = 1;
        }
      }

      route_rows(tree, frontier, goes_deeper);
      frontier = std::move(next);
    }
    return tree;
  }

 private:
  struct BestSplit {
    double gain = -1.0;
    int feature = -1;
    int boundary = -1;
  };

  // Flat per-level statistics: for each frontier node, K class counts
  // followed by a bins x K block per candidate feature.
  struct LevelStats {
    std::vector<int64_t> data;
    std::vector<size_t> node_base;                   // per frontier node
    std::vector<std::vector<size_t>> feature_base;   // per node, per subset slot

    std::vector<int64_t> class_counts(size_t node, size_t k) const {
      return {data.begin() + static_cast<long>(node_base[node]),
              data.begin() + static_cast<long>(node_base[node] + k)};
    }
  };

  template <typename Frontier>
  LevelStats aggregate_level(const std::vector<Frontier>& frontier) {
    LevelStats layout;
    size_t total = 0;
    layout.node_base.resize(frontier.size());
    layout.feature_base.resize(frontier.size());
    for (size_t i = 0; i < frontier.size(); ++i) {
      layout.node_base[i] = total;
      total += n_classes_;
      layout.feature_base[i].reserve(frontier[i].features.size());
      for (int f : frontier[i].features) {
        layout.feature_base[i].push_back(total);
        total += (boundaries_[f].size() + 1) * n_classes_;
      }
    }

    // frontier position per node id, -1 when the node is not on this level
    std::vector<int> frontier_pos(frontier_span(frontier), -1);
    for (size_t i = 0; i < frontier.size(); ++i) {
      frontier_pos[frontier[i].node] = static_cast<int>(i);
    }

    struct HistAgg {
      using Value = std::vector<int64_t>;
      const TreeBuilder* tb;
      const std::vector<Frontier>* frontier;
      const LevelStats* layout;
      const std::vector<int>* frontier_pos;
      size_t total;

      Value zero() const { return Value(total, 0); }
      void accumulate(Value& v, const FlowTable&, size_t row) const {
        const int node = tb->node_of_row_[row];
        if (node < 0) return;
        const int fp = (*frontier_pos)[node];
        if (fp < 0) return;
        const auto w = static_cast<int64_t>(tb->weights_[row]);
        if (w == 0) return;
        const int cls = tb->target_[row];
        v[layout->node_base[fp] + cls] += w;
        const auto& feats = (*frontier)[fp].features;
        for (size_t p = 0; p < feats.size(); ++p) {
          const int f = feats[p];
          const int bin = tb->binned_[f][row];
          v[layout->feature_base[fp][p] + bin * tb->n_classes_ + cls] += w;
        }
      }
      void merge(Value& a, const Value& b) const {
        for (size_t i = 0; i < a.size(); ++i) a[i] += b[i];
      }
    };

    HistAgg agg{this, &frontier, &layout, &frontier_pos, total};
    PartitionedTable pt = partition(table_, exec_.partitions);
    layout.data = aggregate(pt, agg, exec_.workers);
    return layout;
  }

  BestSplit choose_split(const LevelStats& stats, size_t i, const auto& fr) const {
    const auto parent = stats.class_counts(i, n_classes_);
    int64_t total = 0;
    for (int64_t c : parent) total += c;
    BestSplit best;
    if (total < 2 * params_.min_instances_per_node || total == 0) return best;
    const double parent_gini = gini_impurity(parent);
    if (parent_gini == 0.0) return best;  // pure node

    std::vector<int64_t> left(n_classes_);
    for (size_t p = 0; p < fr.features.size(); ++p) {
      const int f = fr.features[p];
      const size_t nbins = boundaries_[f].size() + 1;
      if (nbins < 2) continue;
      std::fill(left.begin(), left.end(), 0);
      int64_t left_total = 0;
      const size_t base = stats.feature_base[i][p];
      for (size_t b = 0; b + 1 < nbins; ++b) {
        for (size_t c = 0; c < n_classes_; ++c) {
          const int64_t add = stats.data[base + b * n_classes_ + c];
          left[c] += add;
          left_total += add;
        }
        const int64_t right_total = total - left_total;
        if (left_total < params_.min_instances_per_node ||
            right_total < params_.min_instances_per_node) {
          continue;
        }
        double gini_left = 0.0, gini_right = 0.0;
        for (size_t c = 0; c < n_classes_; ++c) {
          const double pl = static_cast<double>(left[c]) / static_cast<double>(left_total);
          const double pr = static_cast<double>(parent[c] - left[c]) /
                            static_cast<double>(right_total);
          gini_left += pl * pl;
          gini_right += pr * pr;
        }
        gini_left = 1.0 - gini_left;
        gini_right = 1.0 - gini_right;
        const double wl = static_cast<double>(left_total) / static_cast<double>(total);
        const double wr = static_cast<double>(right_total) / static_cast<double>(total);
        const double gain = parent_gini - wl * gini_left - wr * gini_right;
        // strict > keeps the lowest (feature, boundary) on ties
        if (gain > best.gain) {
          best = {gain, f, static_cast<int>(b)};
        }
      }
    }
    return best;
  }

  template <typename Frontier>
  void route_rows(const DecisionTree& tree, const std::vector<Frontier>& frontier,
                  const std::vector<char>& goes_deeper) {
    std::vector<int> frontier_pos(frontier_span(frontier), -1);
    for (size_t i = 0; i < frontier.size(); ++i) {
      frontier_pos[frontier[i].node] = static_cast<int>(i);
    }
    for (size_t row = 0; row < node_of_row_.size(); ++row) {
      const int node = node_of_row_[row];
      if (node < 0) continue;
      const int fp = static_cast<size_t>(node) < frontier_pos.size()
                         ? frontier_pos[node]
                         : -1;
      if (fp < 0) continue;
      if (!goes_deeper[fp]) {
        node_of_row_[row] = -1;  // settled in a leaf
        continue;
      }
      const TreeNode& nd = tree.nodes[frontier[fp].node];
      const int bin = binned_[nd.feature][row];
      const int split_bin = bin_of_value(nd.threshold, boundaries_[nd.feature]);
      node_of_row_[row] = bin <= split_bin ? nd.left : nd.right;
    }
  }

  // frontier nodes are appended in id order, so the last one has the max id
  template <typename Frontier>
  static size_t frontier_span(const std::vector<Frontier>& frontier) {
    return frontier.empty() ? 0 : frontier.back().node + 1;
  }

  static int argmax_class(const std::vector<int64_t>& counts) {
    size_t best = 0;
    for (size_t c = 1; c < counts.size(); ++c) {
      if (counts[c] > counts[best]) best = c;  // ties keep the lowest index
    }
    return static_cast<int>(best);
  }

  const std::vector<std::vector<uint8_t>>& binned_;
  const std::vector<std::vector<double>>& boundaries_;
  const std::vector<int>& target_;
  size_t n_classes_;
  const std::vector<uint32_t>& weights_;
  TreeParams params_;
  const FlowTable& table_;
  ExecConfig exec_;
  std::vector<int> node_of_row_;
};

struct PreparedFeatures {
  std::vector<std::string> names;
  std::vector<std::vector<uint8_t>> binned;
  std::vector<std::vector<double>> boundaries;
  std::vector<int> target;
  size_t n_classes = 0;
};

inline PreparedFeatures prepare_features(const FlowTable& train,
                                         const std::string& target_col,
                                         std::vector<std::string> features,
                                         int max_bins) {
  if (train.row_count() == 0) throw DataError("training set is empty");
  if (features.empty()) {
    for (size_t col : train.feature_columns()) {
      features.push_back(train.schema().columns[col].name);
    }
  }
  if (features.empty()) throw DataError("no feature columns to train on");

  PreparedFeatures prep;
  prep.names = std::move(features);
  prep.target = class_codes(train, target_col);
  int max_cls = 0;
  for (int c : prep.target) max_cls = std::max(max_cls, c);
  prep.n_classes = static_cast<size_t>(max_cls) + 1;

  for (const auto& name : prep.names) {
    const auto& values = train.numeric(train.require(name));
    for (double v : values) {
      if (std::isnan(v)) {
        throw DataError("feature \"" + name +
                        "\" has missing values; drop them before training");
      }
    }
    auto bounds = compute_bin_boundaries(values, max_bins);
    std::vector<uint8_t> bins(values.size());
    for (size_t r = 0; r < values.size(); ++r) {
      bins[r] = static_cast<uint8_t>(bin_of_value(values[r], bounds));
    }
    prep.boundaries.push_back(std::move(bounds));
    prep.binned.push_back(std::move(bins));
  }
  return prep;
}

inline void validate(const TreeParams& p) {
  if (p.max_depth < 1) throw ConfigError("tree: max_depth must be >= 1");
  if (p.max_bins < 2 || p.max_bins > 256) {
    throw ConfigError("tree: max_bins must be in [2, 256]");  // bins fit a byte
  }
  if (p.min_instances_per_node < 1) {
    throw ConfigError("tree: min_instances_per_node must be >= 1");
  }
  if (p.min_info_gain < 0.0) throw ConfigError("tree: min_info_gain must be >= 0");
}

}  // namespace detail

/// Trains a single decision tree by greedy Gini-gain induction over
/// quantile-binned features. Statistics are exact integer counts aggregated
/// through the partitioned executor, so the model is identical for any
/// partition count.
inline DecisionTree train_decision_tree(const FlowTable& train,
                                        const std::string& target_col,
                                        const TreeParams& params = {},
                                        const ExecConfig& exec = {},
                                        std::vector<std::string> features = {}) {
  detail::validate(params);
  auto prep = detail::prepare_features(train, target_col, std::move(features),
                                       params.max_bins);
  std::vector<uint32_t> weights(train.row_count(), 1);
  detail::TreeBuilder builder(prep.binned, prep.boundaries, prep.target,
                              prep.n_classes, weights, params, train, exec);
  return builder.build(0, 0);
}

}  // namespace flowforge
