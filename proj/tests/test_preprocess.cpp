#include <catch2/catch_amalgamated.hpp>

#include <algorithm>
#include <cmath>
#include <set>

#include "flowforge/preprocess.hpp"
#include "flowforge/rng.hpp"
#include "test_util.hpp"

using namespace flowforge;

namespace {

const double kNaN = std::numeric_limits<double>::quiet_NaN();

FlowTable labeled_rows(const std::vector<std::string>& cats,
                       const std::vector<std::string>& subs,
                       std::vector<double> x = {}) {
  std::vector<std::string> label;
  for (const auto& c : cats) label.push_back(c == "Normal" ? "normal" : "attack");
  if (x.empty()) x.assign(cats.size(), 0.5);
  return ffutil::TableBuilder()
      .num("x", std::move(x))
      .str("label", label, ColumnKind::label_binary)
      .str("category", cats, ColumnKind::label_category)
      .str("subcategory", subs, ColumnKind::label_subcategory)
      .build();
}

}  // namespace

TEST_CASE("index_strings") {
  SECTION("frequency-descending codes") {
    auto t = ffutil::TableBuilder().str("proto", {"tcp", "udp", "tcp"}).build();
    const auto res = index_strings(t, {"proto"});
    CHECK(res.table.numeric(0) == std::vector<double>{0, 1, 0});
    REQUIRE(res.maps.size() == 1);
    CHECK(res.maps[0].mapping.at("tcp") == 0);
    CHECK(res.maps[0].mapping.at("udp") == 1);
  }

  SECTION("frequency ties break lexicographically") {
    auto t = ffutil::TableBuilder().str("c", {"b", "a"}).build();
    const auto res = index_strings(t, {"c"});
    CHECK(res.maps[0].mapping.at("a") == 0);
    CHECK(res.maps[0].mapping.at("b") == 1);
  }

  SECTION("missing markers stay missing instead of getting codes") {
    auto t = ffutil::TableBuilder().str("c", {"x", "", "nan", "x"}).build();
    const auto res = index_strings(t, {"c"});
    const auto& col = res.table.numeric(0);
    CHECK(col[0] == 0.0);
    CHECK(std::isnan(col[1]));
    CHECK(std::isnan(col[2]));
    CHECK(res.maps[0].mapping.size() == 1);
  }

  SECTION("binary label override: attack is 1 even as the majority") {
    auto t = ffutil::TableBuilder()
                 .str("label", {"attack", "attack", "attack", "normal"},
                      ColumnKind::label_binary)
                 .build();
    const auto res = index_strings(t, {"label"});
    CHECK(res.maps[0].mapping.at("normal") == 0);
    CHECK(res.maps[0].mapping.at("attack") == 1);
    CHECK(res.table.numeric(0) == std::vector<double>{1, 1, 1, 0});
  }

  SECTION("unknown column is a schema error") {
    auto t = ffutil::TableBuilder().str("c", {"x"}).build();
    CHECK_THROWS_AS(index_strings(t, {"nope"}), DataError);
  }

  SECTION("default column set on a flow schema is the six string columns") {
    auto t = ffutil::TableBuilder()
                 .str("flgs", {})
                 .str("proto", {})
                 .num("stime", {})
                 .str("saddr", {}, ColumnKind::excluded)
                 .str("sport", {})
                 .str("dport", {})
                 .str("state", {})
                 .str("label", {}, ColumnKind::label_binary)
                 .str("category", {}, ColumnKind::label_category)
                 .str("subcategory", {}, ColumnKind::label_subcategory)
                 .build();
    const auto cols = default_index_columns(t);
    CHECK(std::set<std::string>(cols.begin(), cols.end()) ==
          std::set<std::string>{"proto", "flgs", "state", "sport", "dport", "label"});
  }
}

TEST_CASE("drop_duplicates") {
  SECTION("duplicate-free table is unchanged") {
    auto t = ffutil::TableBuilder().num("x", {1, 2, 3}).build();
    const auto res = drop_duplicates(t);
    CHECK(res.removed_count == 0);
    CHECK(res.table == t);
  }

  SECTION("repeated row keeps the first occurrence") {
    auto t = ffutil::TableBuilder()
                 .num("x", {1, 2, 1})
                 .str("s", {"a", "b", "a"})
                 .build();
    const auto res = drop_duplicates(t);
    CHECK(res.removed_count == 1);
    CHECK(res.table.row_count() == 2);
    CHECK(res.table.numeric(0) == std::vector<double>{1, 2});
  }

  SECTION("empty table") {
    auto t = ffutil::TableBuilder().num("x", {}).build();
    const auto res = drop_duplicates(t);
    CHECK(res.removed_count == 0);
    CHECK(res.table.row_count() == 0);
  }

  SECTION("excluded columns do not contribute to row identity") {
    auto t = ffutil::TableBuilder()
                 .num("x", {1, 1})
                 .str("saddr", {"10.0.0.1", "10.0.0.2"}, ColumnKind::excluded)
                 .build();
    CHECK(drop_duplicates(t).removed_count == 1);
  }

  SECTION("idempotence on random tables") {
    Rng rng(0xd0d0);
    for (int trial = 0; trial < 20; ++trial) {
      const size_t n = rng.below(60);
      std::vector<double> xs(n);
      for (auto& x : xs) x = static_cast<double>(rng.below(5));
      auto t = ffutil::TableBuilder().num("x", xs).build();
      const auto once = drop_duplicates(t);
      const auto twice = drop_duplicates(once.table);
      CHECK(twice.removed_count == 0);
      CHECK(twice.table == once.table);
    }
  }
}

TEST_CASE("drop_missing") {
  SECTION("no missing values is identity with an empty report") {
    auto t = labeled_rows({"DoS", "Normal"}, {"TCP", "Normal"});
    const auto res = drop_missing(t);
    CHECK(res.table == t);
    CHECK(res.report.empty());
  }

  SECTION("report groups dropped rows by subcategory class") {
    auto t = labeled_rows({"DDoS", "DDoS", "Normal", "DDoS"},
                          {"TCP", "TCP", "Normal", "UDP"},
                          {kNaN, 0.5, kNaN, kNaN});
    const auto res = drop_missing(t);
    CHECK(res.table.row_count() == 1);
    CHECK(res.report ==
          MissingReport{{"DDoS_TCP", 1}, {"DDoS_UDP", 1}, {"Normal", 1}});
  }

  SECTION("tables without label columns report as unlabeled") {
    auto t = ffutil::TableBuilder().num("x", {kNaN, 1.0}).build();
    const auto res = drop_missing(t);
    CHECK(res.report == MissingReport{{"unlabeled", 1}});
  }

  SECTION("every row missing leaves an empty table") {
    auto t = ffutil::TableBuilder().num("x", {kNaN, kNaN}).build();
    const auto res = drop_missing(t);
    CHECK(res.table.row_count() == 0);
  }

  SECTION("second application is identity") {
    auto t = labeled_rows({"DoS", "DoS"}, {"TCP", "UDP"}, {kNaN, 1.0});
    const auto once = drop_missing(t);
    const auto twice = drop_missing(once.table);
    CHECK(twice.table == once.table);
    CHECK(twice.report.empty());
  }

  SECTION("missing markers in excluded columns are ignored") {
    auto t = ffutil::TableBuilder()
                 .num("x", {1.0})
                 .str("saddr", {""}, ColumnKind::excluded)
                 .build();
    CHECK(drop_missing(t).table.row_count() == 1);
  }
}

TEST_CASE("min_max_normalize") {
  SECTION("fit: [2,4,6] -> [0, 0.5, 1]") {
    auto t = ffutil::TableBuilder().num("x", {2, 4, 6}).build();
    const auto res = min_max_normalize(t, {"x"});
    CHECK(res.table.numeric(0) == std::vector<double>{0.0, 0.5, 1.0});
    CHECK(res.params.by_column.at("x") == std::pair<double, double>{2.0, 6.0});
  }

  SECTION("constant column maps to zero") {
    auto t = ffutil::TableBuilder().num("x", {7, 7}).build();
    const auto res = min_max_normalize(t, {"x"});
    CHECK(res.table.numeric(0) == std::vector<double>{0.0, 0.0});
  }

  SECTION("applied mode clamps out-of-range values") {
    NormalizationParams params;
    params.by_column["x"] = {0.0, 5.0};
    auto t = ffutil::TableBuilder().num("x", {10.0, -3.0, 2.5}).build();
    const auto res = min_max_normalize(t, {"x"}, params);
    CHECK(res.table.numeric(0) == std::vector<double>{1.0, 0.0, 0.5});
  }

  SECTION("applied mode requires a range per column") {
    NormalizationParams params;
    auto t = ffutil::TableBuilder().num("x", {1.0}).build();
    CHECK_THROWS_AS(min_max_normalize(t, {"x"}, params), ConfigError);
  }

  SECTION("fitted min maps to exactly 0 and max to exactly 1") {
    Rng rng(0xaaaa);
    for (int trial = 0; trial < 30; ++trial) {
      const size_t n = 2 + rng.below(50);
      std::vector<double> xs(n);
      for (auto& x : xs) x = (rng.uniform01() - 0.5) * 2000.0;
      xs[0] = xs[1] + 1.0;  // guarantee non-constant
      auto t = ffutil::TableBuilder().num("x", xs).build();
      const auto out = min_max_normalize(t, {"x"}).table.numeric(0);
      CHECK(*std::min_element(out.begin(), out.end()) == 0.0);
      CHECK(*std::max_element(out.begin(), out.end()) == 1.0);
      for (double v : out) {
        CHECK(v >= 0.0);
        CHECK(v <= 1.0);
      }
    }
  }

  SECTION("missing values pass through untouched") {
    auto t = ffutil::TableBuilder().num("x", {1.0, kNaN, 3.0}).build();
    const auto out = min_max_normalize(t, {"x"}).table.numeric(0);
    CHECK(out[0] == 0.0);
    CHECK(std::isnan(out[1]));
    CHECK(out[2] == 1.0);
  }
}

TEST_CASE("undersample") {
  auto imbalanced = [] {
    std::vector<std::string> cats, subs;
    std::vector<double> xs;
    for (int i = 0; i < 1000; ++i) {
      cats.push_back("DoS");
      subs.push_back("TCP");
      xs.push_back(static_cast<double>(i));
    }
    for (int i = 0; i < 10; ++i) {
      cats.push_back("Normal");
      subs.push_back("Normal");
      xs.push_back(10000.0 + i);
    }
    return labeled_rows(cats, subs, xs);
  }();

  SECTION("exact per-class keep counts") {
    SamplingPlan plan;
    plan.ratios = {{"DoS_TCP", 0.01}, {"Normal", 1.0}};
    plan.seed = 42;
    const auto res = undersample(imbalanced, plan);
    CHECK(res.kept_per_class.at("DoS_TCP") == 10);
    CHECK(res.kept_per_class.at("Normal") == 10);
    CHECK(res.table.row_count() == 20);
  }

  SECTION("all ratios 1.0 is the identity") {
    SamplingPlan plan;
    plan.ratios = {{"DoS_TCP", 1.0}, {"Normal", 1.0}};
    const auto res = undersample(imbalanced, plan);
    CHECK(res.table == imbalanced);
  }

  SECTION("same plan and seed select the same rows") {
    SamplingPlan plan;
    plan.ratios = {{"DoS_TCP", 0.25}, {"Normal", 0.5}};
    plan.seed = 9;
    CHECK(undersample(imbalanced, plan).table == undersample(imbalanced, plan).table);
  }

  SECTION("rows are selected, never mutated") {
    SamplingPlan plan;
    plan.ratios = {{"DoS_TCP", 0.05}, {"Normal", 1.0}};
    plan.seed = 3;
    const auto res = undersample(imbalanced, plan);
    const auto& orig = imbalanced.numeric(0);
    const std::set<double> pool(orig.begin(), orig.end());
    for (double v : res.table.numeric(0)) CHECK(pool.count(v) == 1);
  }

  SECTION("class missing from the plan is a configuration error") {
    SamplingPlan plan;
    plan.ratios = {{"DoS_TCP", 0.5}};
    CHECK_THROWS_AS(undersample(imbalanced, plan), ConfigError);
  }

  SECTION("cap plans resolve against observed counts") {
    SamplingPlan plan;
    plan.cap = 100;
    plan.seed = 5;
    const auto res = undersample(imbalanced, plan);
    CHECK(res.kept_per_class.at("DoS_TCP") == 100);
    CHECK(res.kept_per_class.at("Normal") == 10);  // under the cap, kept whole
  }

  SECTION("ratio outside (0,1] rejected") {
    SamplingPlan plan;
    plan.ratios = {{"DoS_TCP", 0.0}, {"Normal", 1.0}};
    CHECK_THROWS_AS(undersample(imbalanced, plan), ConfigError);
    plan.ratios = {{"DoS_TCP", 1.5}, {"Normal", 1.0}};
    CHECK_THROWS_AS(undersample(imbalanced, plan), ConfigError);
  }
}

TEST_CASE("split_train_test") {
  auto table_n = [](size_t n) {
    std::vector<double> xs(n), target(n);
    for (size_t i = 0; i < n; ++i) {
      xs[i] = static_cast<double>(i);
      target[i] = i % 2 ? 1.0 : 0.0;
    }
    return ffutil::TableBuilder().num("x", xs).target(target).build();
  };

  SECTION("100 rows at 0.7 give 70/30") {
    const auto res = split_train_test(table_n(100), 0.7, 1, false);
    CHECK(res.train.row_count() == 70);
    CHECK(res.test.row_count() == 30);
  }

  SECTION("stratified per-class rounding") {
    std::vector<double> target;
    std::vector<double> xs;
    for (int i = 0; i < 10; ++i) { target.push_back(0); xs.push_back(i); }
    for (int i = 0; i < 90; ++i) { target.push_back(1); xs.push_back(100 + i); }
    auto t = ffutil::TableBuilder().num("x", xs).target(target).build();
    const auto res = split_train_test(t, 0.7, 1, true);
    const auto counts = class_counts(res.train, kTargetColumn);
    CHECK(counts == std::vector<int64_t>{7, 63});
    CHECK(res.test.row_count() == 30);
  }

  SECTION("rounding keeps both sides non-empty") {
    const auto res = split_train_test(table_n(10), 0.999, 1, false);
    CHECK(res.train.row_count() == 9);
    CHECK(res.test.row_count() == 1);
  }

  SECTION("tables under 2 rows rejected") {
    CHECK_THROWS_AS(split_train_test(table_n(1), 0.7, 1, false), ConfigError);
  }

  SECTION("disjoint and exhaustive") {
    const auto res = split_train_test(table_n(101), 0.7, 77, true);
    std::multiset<double> seen;
    for (double v : res.train.numeric(0)) seen.insert(v);
    for (double v : res.test.numeric(0)) seen.insert(v);
    CHECK(seen.size() == 101);
    CHECK(std::set<double>(seen.begin(), seen.end()).size() == 101);
  }

  SECTION("deterministic per seed") {
    const auto a = split_train_test(table_n(50), 0.7, 5, true);
    const auto b = split_train_test(table_n(50), 0.7, 5, true);
    CHECK(a.train == b.train);
    CHECK(a.test == b.test);
  }
}

TEST_CASE("make_folds") {
  auto table_n = [](size_t n) {
    std::vector<double> xs(n), target(n);
    for (size_t i = 0; i < n; ++i) {
      xs[i] = static_cast<double>(i);
      target[i] = i % 3 == 0 ? 0.0 : 1.0;
    }
    return ffutil::TableBuilder().num("x", xs).target(target).build();
  };

  SECTION("100 rows, k=10: ten folds of ten") {
    const auto fa = make_folds(table_n(100), 10, 1, false);
    for (size_t f = 0; f < 10; ++f) CHECK(fa.fold_rows(f).size() == 10);
  }

  SECTION("103 rows, k=10: sizes differ by at most one") {
    const auto fa = make_folds(table_n(103), 10, 1, false);
    size_t lo = 1000, hi = 0;
    for (size_t f = 0; f < 10; ++f) {
      const size_t s = fa.fold_rows(f).size();
      lo = std::min(lo, s);
      hi = std::max(hi, s);
    }
    CHECK(hi - lo <= 1);
  }

  SECTION("folds are disjoint and exhaustive") {
    const auto fa = make_folds(table_n(47), 5, 3, true);
    std::set<size_t> seen;
    size_t total = 0;
    for (size_t f = 0; f < 5; ++f) {
      for (size_t r : fa.fold_rows(f)) {
        seen.insert(r);
        total++;
      }
    }
    CHECK(total == 47);
    CHECK(seen.size() == 47);
  }

  SECTION("stratified folds balance classes within one") {
    const auto t = table_n(100);
    const auto fa = make_folds(t, 10, 7, true);
    const auto& target = t.numeric(t.require(kTargetColumn));
    for (int cls = 0; cls < 2; ++cls) {
      size_t lo = 1000, hi = 0;
      for (size_t f = 0; f < 10; ++f) {
        size_t count = 0;
        for (size_t r : fa.fold_rows(f)) {
          if (static_cast<int>(target[r]) == cls) count++;
        }
        lo = std::min(lo, count);
        hi = std::max(hi, count);
      }
      CHECK(hi - lo <= 1);
    }
  }

  SECTION("k out of range rejected") {
    CHECK_THROWS_AS(make_folds(table_n(5), 6, 1, false), ConfigError);
    CHECK_THROWS_AS(make_folds(table_n(5), 1, 1, false), ConfigError);
  }
}

TEST_CASE("pipeline chain is deterministic") {
  // index -> dedup -> missing -> normalize, run twice
  auto make = [] {
    return ffutil::TableBuilder()
        .str("proto", {"tcp", "udp", "tcp", "", "udp", "tcp"})
        .num("x", {5, 3, 5, 1, kNaN, 2})
        .str("label", {"attack", "normal", "attack", "attack", "normal", "attack"},
             ColumnKind::label_binary)
        .build();
  };
  auto run = [](FlowTable t) {
    t = index_strings(t, {"proto", "label"}).table;
    t = drop_duplicates(t).table;
    t = drop_missing(t).table;
    return min_max_normalize(t, {"proto", "x"}).table;
  };
  CHECK(run(make()) == run(make()));
}
