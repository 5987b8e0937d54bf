#pragma once

#include <charconv>
#include <cstdint>
#include <fstream>
#include <string>
#include <variant>
#include <vector>

#include <json.hpp>

#include "phasekit/error.hpp"

namespace phasekit::cli {

using Cell = std::variant<double, std::int64_t, bool, std::string>;

struct Table {
  std::vector<std::string> columns;
  std::vector<std::vector<Cell>> rows;

  void add(std::vector<Cell> row) {
    if (row.size() != columns.size())
      throw Error(ErrorKind::Precondition, "cli", "table row has " + std::to_string(row.size()) + " cells, expected " +
                                                      std::to_string(columns.size()));
    rows.push_back(std::move(row));
  }
};

/// Shortest representation that parses back to the same double.
inline std::string format_double(double v) {
  char buf[32];
  auto [end, ec] = std::to_chars(buf, buf + sizeof buf, v);
  (void)ec;
  return std::string(buf, end);
}

inline std::string csv_field(const std::string& s) {
  if (s.find_first_of(",\"\r\n") == std::string::npos) return s;
  std::string out = "\"";
  for (char ch : s) {
    if (ch == '"') out += '"';
    out += ch;
  }
  return out + "\"";
}

inline std::string cell_text(const Cell& c) {
  struct {
    std::string operator()(double v) const { return format_double(v); }
    std::string operator()(std::int64_t v) const { return std::to_string(v); }
    std::string operator()(bool v) const { return v ? "true" : "false"; }
    std::string operator()(const std::string& v) const { return csv_field(v); }
  } visit;
  return std::visit(visit, c);
}

/// RFC 4180: comma separated, CRLF line ends, quoted when needed.
inline std::string to_csv(const Table& t) {
  std::string out;
  for (std::size_t i = 0; i < t.columns.size(); ++i) out += (i ? "," : "") + csv_field(t.columns[i]);
  out += "\r\n";
  for (const auto& row : t.rows) {
    for (std::size_t i = 0; i < row.size(); ++i) out += (i ? "," : "") + cell_text(row[i]);
    out += "\r\n";
  }
  return out;
}

/// Array of row objects; keys keep column order.
inline nlohmann::ordered_json to_json(const Table& t) {
  auto arr = nlohmann::ordered_json::array();
  for (const auto& row : t.rows) {
    nlohmann::ordered_json obj = nlohmann::ordered_json::object();
    for (std::size_t i = 0; i < row.size(); ++i)
      std::visit([&](const auto& v) { obj[t.columns[i]] = v; }, row[i]);
    arr.push_back(std::move(obj));
  }
  return arr;
}

inline void write_file(const std::string& path, const std::string& body) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error(ErrorKind::Config, "cli", "cannot write '" + path + "'");
  out << body;
  if (!out) throw Error(ErrorKind::Config, "cli", "write failed for '" + path + "'");
}

}  // namespace phasekit::cli
