#pragma once

// Small builders shared by the test suites.

#include <string>
#include <vector>

#include "flowforge/table.hpp"

namespace ffutil {

using flowforge::ColumnData;
using flowforge::ColumnKind;
using flowforge::ColumnSchema;
using flowforge::FlowTable;
using flowforge::TableSchema;

class TableBuilder {
 public:
  TableBuilder& num(std::string name, std::vector<double> values,
                    ColumnKind kind = ColumnKind::numeric, bool indexed = false) {
    schema_.columns.push_back({std::move(name), kind, true,
                               kind == ColumnKind::numeric ? indexed : true});
    cols_.emplace_back(std::move(values));
    return *this;
  }

  TableBuilder& str(std::string name, std::vector<std::string> values,
                    ColumnKind kind = ColumnKind::categorical) {
    schema_.columns.push_back({std::move(name), kind, true, false});
    cols_.emplace_back(std::move(values));
    return *this;
  }

  // integer class column named like the derived target
  TableBuilder& target(std::vector<double> values) {
    schema_.columns.push_back(
        {flowforge::kTargetColumn, ColumnKind::excluded, false, true});
    cols_.emplace_back(std::move(values));
    return *this;
  }

  FlowTable build() { return FlowTable(schema_, std::move(cols_)); }

 private:
  TableSchema schema_;
  std::vector<ColumnData> cols_;
};

}  // namespace ffutil
