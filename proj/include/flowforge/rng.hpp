#pragma once

#include <cstdint>
#include <random>
#include <vector>

namespace flowforge {

// All sampling, splitting and fold assignment goes through this wrapper so
// that runs are reproducible across platforms. The engine is std::mt19937_64
// (fully specified by the standard); the derived draws below are hand-rolled
// because the std distributions are not portable across library
// implementations.
class Rng {
 public:
  explicit Rng(uint64_t seed) : engine_(seed) {}

  uint64_t next() { return engine_(); }

  // Unbiased draw in [0, bound) via rejection from the top of the range.
  uint64_t below(uint64_t bound) {
    if (bound <= 1) return 0;
    const uint64_t limit = UINT64_MAX - UINT64_MAX % bound;
    uint64_t x;
    do {
      x = engine_();
    } while (x >= limit);
    return x % bound;
  }

  // Uniform double in [0, 1) with 53 random bits.
  double uniform01() { return (engine_() >> 11) * 0x1.0p-53; }

  // Fisher-Yates shuffle.
  template <typename T>
  void shuffle(std::vector<T>& v) {
    for (size_t i = v.size(); i > 1; --i) {
      std::swap(v[i - 1], v[below(i)]);
    }
  }

  // Draws k distinct elements from items, preserving no particular order.
  template <typename T>
  std::vector<T> sample_without_replacement(std::vector<T> items, size_t k) {
    // partial Fisher-Yates: after i swaps the first i slots are the sample
    const size_t n = items.size();
    if (k > n) k = n;
    for (size_t i = 0; i < k; ++i) {
      std::swap(items[i], items[i + below(n - i)]);
    }
    items.resize(k);
    return items;
  }

  // Index draw from an (unnormalized) non-negative weight vector.
  size_t discrete(const std::vector<double>& weights) {
    double total = 0.0;
    for (double w : weights) total += w;
    double u = uniform01() * total;
    double acc = 0.0;
    for (size_t i = 0; i < weights.size(); ++i) {
      acc += weights[i];
      if (u < acc) return i;
    }
    return weights.empty() ? 0 : weights.size() - 1;
  }

 private:
  std::mt19937_64 engine_;
};

// SplitMix64 finalizer; used to derive independent per-stage and per-tree
// seeds from one experiment seed.
inline uint64_t mix_seed(uint64_t seed, uint64_t stream) {
  uint64_t z = seed + 0x9e3779b97f4a7c15ULL * (stream + 1);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

}  // namespace flowforge
