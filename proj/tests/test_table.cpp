#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <set>

#include "flowforge/labels.hpp"
#include "flowforge/schema.hpp"
#include "flowforge/table.hpp"
#include "test_util.hpp"

using namespace flowforge;

TEST_CASE("schema invariants") {
  TableSchema s;
  s.columns = {{"a", ColumnKind::numeric, true, false},
               {"label", ColumnKind::label_binary, false, false}};
  CHECK_NOTHROW(s.validate());

  SECTION("duplicate names rejected") {
    s.columns.push_back({"a", ColumnKind::numeric, true, false});
    CHECK_THROWS_AS(s.validate(), ConfigError);
  }
  SECTION("exactly one binary label") {
    s.columns.push_back({"label2", ColumnKind::label_binary, false, false});
    CHECK_THROWS_AS(s.validate(), ConfigError);
  }
  SECTION("at most one category label") {
    s.columns.push_back({"c1", ColumnKind::label_category, false, false});
    CHECK_NOTHROW(s.validate());
    s.columns.push_back({"c2", ColumnKind::label_category, false, false});
    CHECK_THROWS_AS(s.validate(), ConfigError);
  }
}

TEST_CASE("schema JSON round-trip") {
  TableSchema s;
  s.columns = {{"x", ColumnKind::numeric, true, false},
               {"proto", ColumnKind::categorical, true, true},
               {"label", ColumnKind::label_binary, false, false}};
  s.missing_markers = {"", "NA"};
  const auto j = schema_to_json(s);
  CHECK(schema_from_json(j) == s);
}

TEST_CASE("column length mismatch rejected at construction") {
  TableSchema s;
  s.columns = {{"a", ColumnKind::numeric, true, false},
               {"b", ColumnKind::numeric, true, false}};
  std::vector<ColumnData> cols;
  cols.emplace_back(std::vector<double>{1, 2, 3});
  cols.emplace_back(std::vector<double>{1, 2});
  CHECK_THROWS_AS(FlowTable(s, std::move(cols)), DataError);
}

TEST_CASE("take and equality") {
  auto t = ffutil::TableBuilder()
               .num("x", {1, 2, 3, 4})
               .str("s", {"a", "b", "c", "d"})
               .build();
  const auto picked = t.take({2, 0});
  CHECK(picked.row_count() == 2);
  CHECK(picked.numeric(0) == std::vector<double>{3, 1});
  CHECK(picked.strings(1) == std::vector<std::string>{"c", "a"});

  // NaN cells compare equal in table equality
  const double nan = std::numeric_limits<double>::quiet_NaN();
  auto a = ffutil::TableBuilder().num("x", {1, nan}).build();
  auto b = ffutil::TableBuilder().num("x", {1, nan}).build();
  CHECK(a == b);
}

TEST_CASE("derive_labels: binary") {
  SECTION("string labels: attack -> 1, normal -> 0") {
    auto t = ffutil::TableBuilder()
                 .str("label", {"attack", "normal", "attack"}, ColumnKind::label_binary)
                 .build();
    LabelTask task{TaskVariant::binary, {}};
    const auto out = derive_labels(t, task);
    CHECK(task.class_names == std::vector<std::string>{"normal", "attack"});
    CHECK(out.numeric(out.require(kTargetColumn)) == std::vector<double>{1, 0, 1});
  }

  SECTION("numeric 0/1 labels") {
    auto t = ffutil::TableBuilder()
                 .num("label", {0, 1, 1}, ColumnKind::label_binary)
                 .build();
    LabelTask task{TaskVariant::binary, {}};
    const auto out = derive_labels(t, task);
    CHECK(out.numeric(out.require(kTargetColumn)) == std::vector<double>{0, 1, 1});
  }

  SECTION("empty table still gains the target column") {
    auto t = ffutil::TableBuilder().str("label", {}, ColumnKind::label_binary).build();
    LabelTask task{TaskVariant::binary, {}};
    const auto out = derive_labels(t, task);
    CHECK(out.row_count() == 0);
    CHECK(out.find(kTargetColumn) >= 0);
  }

  SECTION("missing label column is a schema error naming the kind") {
    auto t = ffutil::TableBuilder().num("x", {1, 2}).build();
    LabelTask task{TaskVariant::binary, {}};
    CHECK_THROWS_WITH(derive_labels(t, task),
                      Catch::Matchers::ContainsSubstring("label-binary"));
  }
}

TEST_CASE("derive_labels: category concatenation") {
  auto t = ffutil::TableBuilder()
               .str("label", {"attack", "attack", "normal"}, ColumnKind::label_binary)
               .str("category", {"DDoS", "DDoS", "Normal"}, ColumnKind::label_category)
               .str("subcategory", {"TCP", "TCP", "Normal"},
                    ColumnKind::label_subcategory)
               .build();

  SECTION("subcategory names concatenate with underscore") {
    LabelTask task{TaskVariant::sub_category, {}};
    const auto out = derive_labels(t, task);
    REQUIRE(task.class_names.size() == 2);
    CHECK(task.class_names[0] == "DDoS_TCP");   // most frequent first
    CHECK(task.class_names[1] == "Normal");     // Normal/Normal collapses
    CHECK(out.numeric(out.require(kTargetColumn)) == std::vector<double>{0, 0, 1});
  }

  SECTION("main category labels") {
    LabelTask task{TaskVariant::main_category, {}};
    const auto out = derive_labels(t, task);
    CHECK(task.class_names == std::vector<std::string>{"DDoS", "Normal"});
    CHECK(out.numeric(out.require(kTargetColumn)) == std::vector<double>{0, 0, 1});
  }

  SECTION("idempotent re-derivation") {
    LabelTask t1{TaskVariant::sub_category, {}};
    const auto once = derive_labels(t, t1);
    LabelTask t2{TaskVariant::sub_category, {}};
    const auto twice = derive_labels(once, t2);
    CHECK(once == twice);
    CHECK(t1.class_names == t2.class_names);
  }
}

TEST_CASE("the eleven subcategory classes") {
  // category/subcategory pairs covering every class of the missing-value
  // report; the concatenation must produce exactly these names
  const std::vector<std::pair<std::string, std::string>> pairs = {
      {"DDoS", "TCP"}, {"DoS", "HTTP"}, {"DoS", "UDP"},
      {"Theft", "Data_Exfiltration"}, {"DDoS", "HTTP"}, {"Theft", "Keylogging"},
      {"DDoS", "UDP"}, {"Reconnaissance", "OS_Fingerprint"},
      {"Reconnaissance", "Service_Scan"}, {"Normal", "Normal"}, {"DoS", "TCP"}};
  std::vector<std::string> label, cat, sub;
  for (const auto& [c, s] : pairs) {
    label.push_back(c == "Normal" ? "normal" : "attack");
    cat.push_back(c);
    sub.push_back(s);
  }
  auto t = ffutil::TableBuilder()
               .str("label", label, ColumnKind::label_binary)
               .str("category", cat, ColumnKind::label_category)
               .str("subcategory", sub, ColumnKind::label_subcategory)
               .build();
  LabelTask task{TaskVariant::sub_category, {}};
  derive_labels(t, task);
  const std::set<std::string> classes(task.class_names.begin(), task.class_names.end());
  const std::set<std::string> expected = {
      "DDoS_TCP", "DoS_HTTP", "DoS_UDP", "Theft_Data_Exfiltration", "DDoS_HTTP",
      "Theft_Keylogging", "DDoS_UDP", "Reconnaissance_OS_Fingerprint",
      "Reconnaissance_Service_Scan", "Normal", "DoS_TCP"};
  CHECK(classes == expected);
  CHECK(task.num_classes() == 11);
}

TEST_CASE("class_counts") {
  SECTION("counts sum to row count") {
    auto t = ffutil::TableBuilder().target({0, 0, 1}).build();
    const auto counts = class_counts(t, kTargetColumn);
    CHECK(counts == std::vector<int64_t>{2, 1});
  }
  SECTION("empty table with known class count gives zeros") {
    auto t = ffutil::TableBuilder().target({}).build();
    CHECK(class_counts(t, kTargetColumn, 3) == std::vector<int64_t>{0, 0, 0});
  }
  SECTION("non-integer column is a type error") {
    auto t = ffutil::TableBuilder().target({0.5, 1.0}).build();
    CHECK_THROWS_AS(class_counts(t, kTargetColumn), DataError);
  }
  SECTION("string column is a type error") {
    auto t = ffutil::TableBuilder().str("c", {"a", "b"}).build();
    CHECK_THROWS_AS(class_counts(t, "c"), DataError);
  }
}

TEST_CASE("derived targets never enter the feature set") {
  auto t = ffutil::TableBuilder()
               .num("x", {1, 2})
               .str("label", {"attack", "normal"}, ColumnKind::label_binary)
               .build();
  LabelTask task{TaskVariant::binary, {}};
  const auto out = derive_labels(t, task);
  for (size_t col : out.feature_columns()) {
    CHECK(out.schema().columns[col].name != kTargetColumn);
  }
  CHECK(out.feature_columns().size() == 1);
}
