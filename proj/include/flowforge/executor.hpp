#pragma once

#include <atomic>
#include <cstddef>
#include <thread>
#include <vector>

#include "flowforge/table.hpp"

namespace flowforge {

struct RowRange {
  size_t begin = 0;
  size_t end = 0;  // exclusive
  size_t size() const { return end - begin; }
};

// Contiguous row-range partitioning of a table. Partitions are disjoint,
// exhaustive and in row order, so concatenating them reconstructs the table.
class PartitionedTable {
 public:
  PartitionedTable(const FlowTable& table, std::vector<RowRange> parts)
      : table_(&table), parts_(std::move(parts)) {}

  const FlowTable& table() const { return *table_; }
  size_t partition_count() const { return parts_.size(); }
  RowRange part(size_t i) const { return parts_[i]; }

 private:
  const FlowTable* table_;
  std::vector<RowRange> parts_;
};

/// Splits a table into n contiguous partitions with sizes differing by at
/// most one (fewer partitions when the table has fewer rows than n).
inline PartitionedTable partition(const FlowTable& table, size_t n) {
  if (n == 0) throw ConfigError("partition count must be >= 1");
  const size_t rows = table.row_count();
  if (n > rows) n = rows;
  std::vector<RowRange> parts;
  parts.reserve(n);
  size_t base = n ? rows / n : 0;
  size_t extra = n ? rows % n : 0;
  size_t at = 0;
  for (size_t i = 0; i < n; ++i) {
    size_t len = base + (i < extra ? 1 : 0);
    parts.push_back({at, at + len});
    at += len;
  }
  return PartitionedTable(table, std::move(parts));
}

// An aggregator supplies:
//   Value zero() const;
//   void accumulate(Value&, const FlowTable&, size_t row) const;
//   void merge(Value&, const Value&) const;   // associative + commutative
// Statistics must be exact (integer counts) for partition invariance to be
// bit-exact.
template <typename Agg>
concept RowAggregator = requires(const Agg a, typename Agg::Value v,
                                 const FlowTable& t, size_t row) {
  { a.zero() } -> std::convertible_to<typename Agg::Value>;
  a.accumulate(v, t, row);
  a.merge(v, v);
};

/// Runs the aggregator over every partition (on a pool of `workers` threads;
/// 0 means hardware concurrency) and merges the per-partition values in
/// partition-index order. The merge laws make the schedule irrelevant; the
/// fixed merge order keeps it provably so.
template <RowAggregator Agg>
typename Agg::Value aggregate(const PartitionedTable& pt, const Agg& agg,
                              unsigned workers = 0) {
  using Value = typename Agg::Value;
  const size_t np = pt.partition_count();
  const FlowTable& table = pt.table();

  auto run_part = [&](size_t i, Value& out) {
    RowRange r = pt.part(i);
    for (size_t row = r.begin; row < r.end; ++row) {
      agg.accumulate(out, table, row);
    }
  };

  std::vector<Value> results(np, agg.zero());
  if (workers == 0) workers = std::max(1u, std::thread::hardware_concurrency());
  const unsigned pool = static_cast<unsigned>(std::min<size_t>(workers, np));

  if (pool <= 1) {
    for (size_t i = 0; i < np; ++i) run_part(i, results[i]);
  } else {
    std::atomic<size_t> next{0};
    std::vector<std::thread> threads;
    threads.reserve(pool);
    for (unsigned w = 0; w < pool; ++w) {
      threads.emplace_back([&] {
        for (;;) {
          size_t i = next.fetch_add(1);
          if (i >= np) return;
          run_part(i, results[i]);
        }
      });
    }
    for (auto& t : threads) t.join();
  }

  Value acc = agg.zero();
  for (size_t i = 0; i < np; ++i) agg.merge(acc, results[i]);
  return acc;
}

}  // namespace flowforge
