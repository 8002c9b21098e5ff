#pragma once

#include <cmath>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "flowforge/rng.hpp"
#include "flowforge/tree.hpp"

namespace flowforge {

struct ForestParams {
  int num_trees = 20;
  bool bootstrap = true;
  // 0 = ceil(sqrt(feature count)), the classification default
  int feature_subset_size = 0;
  TreeParams tree;
  uint64_t seed = 0;
};

struct RandomForest {
  std::vector<DecisionTree> trees;
  uint64_t seed = 0;
  size_t n_classes = 0;

  // majority vote; ties go to the lowest class index
  int predict_row(std::span<const double> x) const {
    std::vector<int64_t> votes(n_classes, 0);
    for (const auto& t : trees) votes[t.predict_row(x)]++;
    size_t best = 0;
    for (size_t c = 1; c < votes.size(); ++c) {
      if (votes[c] > votes[best]) best = c;
    }
    return static_cast<int>(best);
  }
};

/// Trains num_trees Gini trees, each on a seeded bootstrap resample (when
/// enabled) with per-node feature subsampling. Bin boundaries are computed
/// once on the unsampled training data and shared by all trees; bootstrap
/// multiplicities are drawn globally per tree, so the model depends only on
/// (data, params, seed) and never on the partition count.
inline RandomForest train_random_forest(const FlowTable& train,
                                        const std::string& target_col,
                                        const ForestParams& params = {},
                                        const ExecConfig& exec = {},
                                        std::vector<std::string> features = {}) {
  if (params.num_trees < 1) throw ConfigError("forest: num_trees must be >= 1");
  detail::validate(params.tree);
  auto prep = detail::prepare_features(train, target_col, std::move(features),
                                       params.tree.max_bins);

  const size_t d = prep.names.size();
  size_t subset = params.feature_subset_size > 0
                      ? static_cast<size_t>(params.feature_subset_size)
                      : static_cast<size_t>(std::ceil(std::sqrt(static_cast<double>(d))));
  if (subset > d) subset = d;

  const size_t n = train.row_count();
  RandomForest forest;
  forest.seed = params.seed;
  forest.n_classes = prep.n_classes;
  forest.trees.reserve(params.num_trees);

  for (int t = 0; t < params.num_trees; ++t) {
    const uint64_t tree_seed = mix_seed(params.seed, static_cast<uint64_t>(t));
    std::vector<uint32_t> weights(n, 1);
    if (params.bootstrap) {
      std::fill(weights.begin(), weights.end(), 0);
      Rng rng(mix_seed(tree_seed, 0x626f6f74ULL));  // bootstrap stream
      for (size_t i = 0; i < n; ++i) weights[rng.below(n)]++;
    }
    detail::TreeBuilder builder(prep.binned, prep.boundaries, prep.target,
                                prep.n_classes, weights, params.tree, train, exec);
    forest.trees.push_back(builder.build(subset == d ? 0 : subset, tree_seed));
  }
  return forest;
}

}  // namespace flowforge
