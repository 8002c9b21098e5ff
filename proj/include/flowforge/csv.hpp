#pragma once

#include <charconv>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <istream>
#include <limits>
#include <sstream>
#include <string>
#include <vector>

#include "flowforge/table.hpp"

namespace flowforge {

// RFC-4180 record reader: comma (or custom) delimiter, double-quote quoting,
// quoted fields may contain delimiters, quotes ("" escape) and newlines.
// Reads record-by-record so shards never have to fit in memory as text.
class CsvParser {
 public:
  explicit CsvParser(std::istream& in, char delimiter = ',')
      : in_(*in.rdbuf()), delimiter_(delimiter) {}

  // Fills `fields` with the next record. Returns false at end of input.
  // Blank lines are skipped.
  bool next_record(std::vector<std::string>& fields) {
    for (;;) {
      if (!parse_record(fields)) return false;
      if (fields.size() == 1 && fields[0].empty()) continue;  // blank line
      return true;
    }
  }

 private:
  bool parse_record(std::vector<std::string>& fields) {
    fields.clear();
    int c = in_.sbumpc();
    if (c == EOF) return false;

    std::string field;
    bool quoted = false;
    for (;;) {
      if (c == EOF) {
        fields.push_back(std::move(field));
        return true;
      }
      if (quoted) {
        if (c == '"') {
          int peek = in_.sbumpc();
          if (peek == '"') {
            field.push_back('"');
          } else {
            quoted = false;
            c = peek;
            continue;  // reprocess the char after the closing quote
          }
        } else {
          field.push_back(static_cast<char>(c));
        }
      } else if (c == '"' && field.empty()) {
        quoted = true;
      } else if (c == delimiter_) {
        fields.push_back(std::move(field));
        field.clear();
      } else if (c == '\n') {
        fields.push_back(std::move(field));
        return true;
      } else if (c == '\r') {
        int peek = in_.sgetc();
        if (peek == '\n') in_.sbumpc();
        fields.push_back(std::move(field));
        return true;
      } else {
        field.push_back(static_cast<char>(c));
      }
      c = in_.sbumpc();
    }
  }

  std::streambuf& in_;
  char delimiter_;
};

// Shards to union, in order. All shards must agree on the header when
// expect_header is set.
struct ShardManifest {
  std::vector<std::string> paths;
  bool expect_header = true;
  char delimiter = ',';

  void validate() const {
    if (paths.empty()) throw ConfigError("shard manifest has no paths");
  }
};

namespace detail {

inline void check_header(const std::vector<std::string>& header,
                         const TableSchema& schema, const std::string& path) {
  std::string missing, unexpected, reordered;
  for (const auto& c : schema.columns) {
    bool found = false;
    for (const auto& h : header) {
      if (h == c.name) { found = true; break; }
    }
    if (!found) missing += (missing.empty() ? "" : ", ") + c.name;
  }
  for (const auto& h : header) {
    if (schema.find(h) < 0) unexpected += (unexpected.empty() ? "" : ", ") + h;
  }
  if (missing.empty() && unexpected.empty()) {
    for (size_t i = 0; i < header.size() && i < schema.columns.size(); ++i) {
      if (header[i] != schema.columns[i].name) {
        reordered = "column " + std::to_string(i + 1) + " is \"" + header[i] +
                    "\", schema expects \"" + schema.columns[i].name + "\"";
        break;
      }
    }
    if (reordered.empty()) return;
  }
  std::string msg = "header of " + path + " does not match schema";
  if (!missing.empty()) msg += "; missing columns: " + missing;
  if (!unexpected.empty()) msg += "; unexpected columns: " + unexpected;
  if (!reordered.empty()) msg += "; " + reordered;
  throw DataError(msg);
}

inline double parse_numeric_cell(const std::string& cell, const TableSchema& schema) {
  if (schema.is_missing_marker(cell)) return std::numeric_limits<double>::quiet_NaN();
  const char* first = cell.data();
  const char* last = cell.data() + cell.size();
  // tolerate surrounding spaces
  while (first < last && *first == ' ') ++first;
  while (last > first && *(last - 1) == ' ') --last;
  double v{};
  auto res = std::from_chars(first, last, v);
  if (res.ec != std::errc() || res.ptr != last) {
    return std::numeric_limits<double>::quiet_NaN();  // unparsable -> missing
  }
  return v;
}

inline void append_record(const std::vector<std::string>& fields,
                          const TableSchema& schema,
                          std::vector<ColumnData>& cols, size_t row_no,
                          const std::string& path) {
  if (fields.size() != schema.columns.size()) {
    throw DataError(path + ": record " + std::to_string(row_no) + " has " +
                    std::to_string(fields.size()) + " fields, schema expects " +
                    std::to_string(schema.columns.size()));
  }
  for (size_t i = 0; i < fields.size(); ++i) {
    if (std::holds_alternative<std::vector<double>>(cols[i])) {
      std::get<std::vector<double>>(cols[i]).push_back(
          parse_numeric_cell(fields[i], schema));
    } else {
      std::get<std::vector<std::string>>(cols[i]).push_back(fields[i]);
    }
  }
}

inline std::vector<ColumnData> empty_columns(const TableSchema& schema) {
  std::vector<ColumnData> cols;
  cols.reserve(schema.columns.size());
  for (const auto& c : schema.columns) {
    if (FlowTable::stores_numeric(c)) {
      cols.emplace_back(std::vector<double>{});
    } else {
      cols.emplace_back(std::vector<std::string>{});
    }
  }
  return cols;
}

inline void read_into(const std::string& path, const TableSchema& schema,
                      std::vector<ColumnData>& cols, bool expect_header,
                      char delimiter) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open CSV file: " + path);
  CsvParser parser(in, delimiter);
  std::vector<std::string> fields;
  size_t row_no = 0;
  if (expect_header) {
    if (!parser.next_record(fields)) {
      throw DataError("CSV file is empty (no header): " + path);
    }
    check_header(fields, schema, path);
  }
  while (parser.next_record(fields)) {
    append_record(fields, schema, cols, ++row_no, path);
  }
}

}  // namespace detail

/// Reads one CSV file against a schema. Numeric columns are parsed to
/// doubles; unparsable or marker cells become missing values (the row is
/// kept; removal is a separate preprocessing step).
inline FlowTable read_csv(const std::string& path, const TableSchema& schema,
                          bool expect_header = true, char delimiter = ',') {
  auto cols = detail::empty_columns(schema);
  detail::read_into(path, schema, cols, expect_header, delimiter);
  return FlowTable(schema, std::move(cols));
}

/// Unions all shards of a manifest into one table, in manifest order.
/// A header mismatch in any shard aborts the whole union.
inline FlowTable union_shards(const ShardManifest& manifest, const TableSchema& schema) {
  manifest.validate();
  auto cols = detail::empty_columns(schema);
  for (const auto& path : manifest.paths) {
    detail::read_into(path, schema, cols, manifest.expect_header, manifest.delimiter);
  }
  return FlowTable(schema, std::move(cols));
}

inline std::string csv_quote(const std::string& cell, char delimiter) {
  bool needs_quote = false;
  for (char c : cell) {
    if (c == delimiter || c == '"' || c == '\n' || c == '\r') {
      needs_quote = true;
      break;
    }
  }
  if (!needs_quote) return cell;
  std::string out = "\"";
  for (char c : cell) {
    if (c == '"') out += "\"\"";
    else out.push_back(c);
  }
  out += '"';
  return out;
}

/// Writes a table as CSV (header + rows). Doubles are serialized in their
/// shortest round-trip form so read_csv(write_csv(t)) == t on tables without
/// missing values.
inline void write_csv(const FlowTable& table, const std::string& path,
                      char delimiter = ',') {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot write CSV file: " + path);
  const auto& schema = table.schema();
  for (size_t i = 0; i < schema.columns.size(); ++i) {
    if (i) out << delimiter;
    out << csv_quote(schema.columns[i].name, delimiter);
  }
  out << '\n';
  for (size_t r = 0; r < table.row_count(); ++r) {
    for (size_t c = 0; c < schema.columns.size(); ++c) {
      if (c) out << delimiter;
      out << csv_quote(table.cell_text(r, c), delimiter);
    }
    out << '\n';
  }
  if (!out) throw DataError("write failed: " + path);
}

/// Streaming merge for the CLI: validates each shard header against the
/// schema and copies data bytes straight to the output, so arbitrarily many
/// shards never need to be held in memory.
inline size_t stream_merge(const ShardManifest& manifest, const TableSchema& schema,
                           const std::string& out_path) {
  manifest.validate();
  std::ofstream out(out_path, std::ios::binary);
  if (!out) throw DataError("cannot write CSV file: " + out_path);

  // header from the schema
  for (size_t i = 0; i < schema.columns.size(); ++i) {
    if (i) out << manifest.delimiter;
    out << csv_quote(schema.columns[i].name, manifest.delimiter);
  }
  out << '\n';

  size_t shards_done = 0;
  for (const auto& path : manifest.paths) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw DataError("cannot open CSV file: " + path);
    if (manifest.expect_header) {
      std::string header_line;
      if (!std::getline(in, header_line)) {
        throw DataError("CSV file is empty (no header): " + path);
      }
      if (!header_line.empty() && header_line.back() == '\r') header_line.pop_back();
      std::istringstream hs(header_line);
      CsvParser hp(hs, manifest.delimiter);
      std::vector<std::string> header;
      if (!hp.next_record(header)) {
        throw DataError("CSV file has a blank header line: " + path);
      }
      detail::check_header(header, schema, path);
    }
    char last = '\n';
    char buf[1 << 16];
    while (in.read(buf, sizeof buf) || in.gcount() > 0) {
      std::streamsize n = in.gcount();
      out.write(buf, n);
      last = buf[n - 1];
    }
    if (last != '\n') out << '\n';
    shards_done++;
  }
  if (!out) throw DataError("write failed: " + out_path);
  return shards_done;
}

/// Expands a manifest argument: a path containing glob metacharacters is
/// matched against its parent directory (sorted lexicographically);
/// otherwise the file is read as one shard path per line.
inline ShardManifest load_manifest(const std::string& arg) {
  ShardManifest m;
  if (arg.find_first_of("*?[") != std::string::npos) {
    namespace fs = std::filesystem;
    fs::path pattern(arg);
    fs::path dir = pattern.parent_path().empty() ? "." : pattern.parent_path();
    const std::string file_pat = pattern.filename().string();
    // minimal glob: * and ? only
    auto matches = [&](const std::string& name) {
      size_t pi = 0, ni = 0, star = std::string::npos, star_ni = 0;
      while (ni < name.size()) {
        if (pi < file_pat.size() && (file_pat[pi] == '?' || file_pat[pi] == name[ni])) {
          pi++; ni++;
        } else if (pi < file_pat.size() && file_pat[pi] == '*') {
          star = pi++; star_ni = ni;
        } else if (star != std::string::npos) {
          pi = star + 1; ni = ++star_ni;
        } else {
          return false;
        }
      }
      while (pi < file_pat.size() && file_pat[pi] == '*') pi++;
      return pi == file_pat.size();
    };
    std::vector<std::string> found;
    if (fs::is_directory(dir)) {
      for (const auto& entry : fs::directory_iterator(dir)) {
        if (entry.is_regular_file() && matches(entry.path().filename().string())) {
          found.push_back(entry.path().string());
        }
      }
    }
    std::sort(found.begin(), found.end());
    m.paths = std::move(found);
  } else {
    std::ifstream in(arg);
    if (!in) throw DataError("cannot open manifest file: " + arg);
    std::string line;
    while (std::getline(in, line)) {
      if (!line.empty() && line.back() == '\r') line.pop_back();
      if (line.empty() || line[0] == '#') continue;
      m.paths.push_back(line);
    }
  }
  if (m.paths.empty()) throw ConfigError("manifest \"" + arg + "\" matched no shards");
  return m;
}

}  // namespace flowforge
