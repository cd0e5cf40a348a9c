#pragma once

#include "superscope/data_model.hpp"

#include <charconv>
#include <cmath>
#include <variant>

namespace superscope {

using Cell = std::variant<std::int64_t, double, std::string>;

/// Shortest text that parses back to the same double; "nan"/"inf" spelled out.
inline std::string format_double(double v) {
  if (std::isnan(v)) return "nan";
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  char buf[64];
  auto res = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, res.ptr);
}

inline double parse_double(const std::string& s) {
  if (s == "nan") return std::numeric_limits<double>::quiet_NaN();
  if (s == "inf") return std::numeric_limits<double>::infinity();
  if (s == "-inf") return -std::numeric_limits<double>::infinity();
  double v = 0.0;
  auto res = std::from_chars(s.data(), s.data() + s.size(), v);
  if (res.ec != std::errc() || res.ptr != s.data() + s.size()) fail(ErrorCode::BadFormat, "not a number: '" + s + "'");
  return v;
}

inline std::string format_cell(const Cell& c) {
  if (std::holds_alternative<std::int64_t>(c)) return std::to_string(std::get<std::int64_t>(c));
  if (std::holds_alternative<double>(c)) return format_double(std::get<double>(c));
  const auto& s = std::get<std::string>(c);
  if (s.find_first_of(",\"\n") == std::string::npos) return s;
  std::string quoted = "\"";
  for (char ch : s) {
    if (ch == '"') quoted += '"';
    quoted += ch;
  }
  return quoted + "\"";
}

struct Table {
  std::string name;
  std::vector<std::string> columns;
  std::vector<std::vector<Cell>> rows;

  void add(std::vector<Cell> row) {
    if (row.size() != columns.size()) fail(ErrorCode::ShapeMismatch, "table '" + name + "' row width");
    rows.push_back(std::move(row));
  }

  std::size_t column(const std::string& col) const {
    for (std::size_t i = 0; i < columns.size(); ++i)
      if (columns[i] == col) return i;
    fail(ErrorCode::BadFormat, "table '" + name + "' has no column '" + col + "'");
  }

  std::string to_csv() const {
    std::string out;
    for (std::size_t i = 0; i < columns.size(); ++i) out += (i ? "," : "") + format_cell(columns[i]);
    out += "\n";
    for (const auto& row : rows) {
      for (std::size_t i = 0; i < row.size(); ++i) out += (i ? "," : "") + format_cell(row[i]);
      out += "\n";
    }
    return out;
  }
};

struct Report {
  std::vector<Table> tables;
  json summary = json::object();

  Table& table(const std::string& name) {
    for (auto& t : tables)
      if (t.name == name) return t;
    fail(ErrorCode::BadFormat, "report has no table '" + name + "'");
  }
};

/// One CSV per table plus summary.json; output depends only on the report
/// content, so identical inputs give byte-identical files.
inline std::vector<fs::path> save_report_tables(const Report& report, const fs::path& out_dir) {
  std::error_code ec;
  fs::create_directories(out_dir, ec);
  if (ec) fail(ErrorCode::IoFailure, "cannot create " + out_dir.string() + ": " + ec.message());
  std::vector<fs::path> written;
  json index = json::array();
  for (const auto& t : report.tables) {
    const fs::path p = out_dir / (t.name + ".csv");
    write_text_atomic(p, t.to_csv());
    written.push_back(p);
    index.push_back(json{{"name", t.name}, {"file", t.name + ".csv"}, {"rows", t.rows.size()}});
  }
  json summary = report.summary;
  summary["tables"] = index;
  const fs::path sp = out_dir / "summary.json";
  write_text_atomic(sp, summary.dump(2) + "\n");
  written.push_back(sp);
  return written;
}

/// Reads a CSV written by Table::to_csv; all cells come back as strings.
inline Table read_csv_table(const fs::path& path) {
  const std::string text = read_text(path);
  Table t;
  t.name = path.stem().string();
  std::vector<std::vector<std::string>> lines;
  std::vector<std::string> cur;
  std::string cell;
  bool quoted = false;
  for (std::size_t i = 0; i < text.size(); ++i) {
    const char ch = text[i];
    if (quoted) {
      if (ch == '"') {
        if (i + 1 < text.size() && text[i + 1] == '"') {
          cell += '"';
          ++i;
        } else {
          quoted = false;
        }
      } else {
        cell += ch;
      }
    } else if (ch == '"') {
      quoted = true;
    } else if (ch == ',') {
      cur.push_back(cell);
      cell.clear();
    } else if (ch == '\n') {
      cur.push_back(cell);
      cell.clear();
      lines.push_back(cur);
      cur.clear();
    } else {
      cell += ch;
    }
  }
  if (!cell.empty() || !cur.empty()) {
    cur.push_back(cell);
    lines.push_back(cur);
  }
  if (lines.empty()) fail(ErrorCode::BadFormat, path.string() + ": empty CSV");
  t.columns = lines.front();
  for (std::size_t i = 1; i < lines.size(); ++i) {
    if (lines[i].size() != t.columns.size()) fail(ErrorCode::BadFormat, path.string() + ": ragged row");
    std::vector<Cell> row;
    for (auto& s : lines[i]) row.emplace_back(s);
    t.rows.push_back(std::move(row));
  }
  return t;
}

inline double cell_number(const Cell& c) {
  if (std::holds_alternative<std::int64_t>(c)) return static_cast<double>(std::get<std::int64_t>(c));
  if (std::holds_alternative<double>(c)) return std::get<double>(c);
  return parse_double(std::get<std::string>(c));
}

inline std::string cell_text(const Cell& c) {
  if (std::holds_alternative<std::string>(c)) return std::get<std::string>(c);
  return format_cell(c);
}

template <typename T>
std::string join(const std::vector<T>& v, char sep = ';') {
  std::string out;
  for (std::size_t i = 0; i < v.size(); ++i) {
    if (i) out += sep;
    if constexpr (std::is_floating_point_v<T>)
      out += format_double(v[i]);
    else
      out += std::to_string(v[i]);
  }
  return out;
}

}  // namespace superscope
