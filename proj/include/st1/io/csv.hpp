#pragma once

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <istream>
#include <numeric>
#include <sstream>
#include <string>
#include <vector>

#include "st1/fitting/trace.hpp"
#include "st1/io/errors.hpp"

namespace st1::io {

enum class TraceSchema { time_series, spectrum, correlation };

inline const char* abscissa_column(TraceSchema s) {
  switch (s) {
    case TraceSchema::time_series: return "t_ns";
    case TraceSchema::spectrum: return "freq_MHz";
    case TraceSchema::correlation: return "tau_ns";
  }
  return "";
}

inline const char* ordinate_column(TraceSchema s) {
  switch (s) {
    case TraceSchema::time_series: return "counts";
    case TraceSchema::spectrum: return "signal";
    case TraceSchema::correlation: return "g2";
  }
  return "";
}

namespace detail {

inline std::vector<std::string> split_csv_line(std::string line) {
  if (!line.empty() && line.back() == '\r') line.pop_back();
  std::vector<std::string> cells;
  std::string cell;
  std::istringstream in(line);
  while (std::getline(in, cell, ',')) {
    const auto b = cell.find_first_not_of(" \t");
    const auto e = cell.find_last_not_of(" \t");
    cells.push_back(b == std::string::npos ? "" : cell.substr(b, e - b + 1));
  }
  if (!line.empty() && line.back() == ',') cells.emplace_back();
  return cells;
}

inline double parse_cell(const std::string& cell, const std::string& source, int line, const std::string& column) {
  const char* b = cell.c_str();
  char* end = nullptr;
  const double v = std::strtod(b, &end);
  if (cell.empty() || end == b || *end != '\0')
    throw DataError(source, line, "non-numeric value '" + cell + "' in column " + column);
  if (!std::isfinite(v)) throw DataError(source, line, "non-finite value in column " + column);
  return v;
}

struct Rows {
  std::vector<std::string> header;
  std::vector<std::vector<double>> values;
  std::vector<int> lines;
};

inline Rows read_rows(std::istream& in, const std::string& source, const std::vector<std::string>& required,
                      const std::string& optional) {
  Rows r;
  std::string line;
  int line_no = 0;
  while (r.header.empty() && std::getline(in, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    r.header = split_csv_line(line);
  }
  if (r.header.empty()) throw DataError(source, 0, "empty file: expected a header row");
  const std::size_t n_req = required.size();
  const bool header_ok =
      (r.header.size() == n_req || (r.header.size() == n_req + 1 && r.header.back() == optional)) &&
      std::equal(required.begin(), required.end(), r.header.begin());
  if (!header_ok) {
    std::string want;
    for (const auto& c : required) want += (want.empty() ? "" : ",") + c;
    throw DataError(source, line_no, "expected header '" + want + "[," + optional + "]'");
  }
  while (std::getline(in, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    const auto cells = split_csv_line(line);
    if (cells.size() != r.header.size())
      throw DataError(source, line_no,
                      "expected " + std::to_string(r.header.size()) + " columns, found " + std::to_string(cells.size()));
    std::vector<double> v;
    for (std::size_t i = 0; i < cells.size(); ++i) v.push_back(parse_cell(cells[i], source, line_no, r.header[i]));
    r.values.push_back(std::move(v));
    r.lines.push_back(line_no);
  }
  return r;
}

}  // namespace detail

inline fit::Trace parse_trace(std::istream& in, TraceSchema schema, const std::string& source = "<input>") {
  const auto rows = detail::read_rows(in, source, {abscissa_column(schema), ordinate_column(schema)}, "sigma");
  if (rows.values.empty()) throw DataError(source, 0, "no data rows");
  const bool has_sigma = rows.header.size() == 3;
  std::vector<std::size_t> order(rows.values.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return rows.values[a][0] < rows.values[b][0]; });
  fit::Trace t;
  for (std::size_t k = 0; k < order.size(); ++k) {
    const auto& v = rows.values[order[k]];
    if (k > 0 && v[0] == t.x.back())
      throw DataError(source, rows.lines[order[k]], "duplicate " + std::string(abscissa_column(schema)) + " value");
    if (has_sigma && !(v[2] > 0.0)) throw DataError(source, rows.lines[order[k]], "sigma must be > 0");
    t.x.push_back(v[0]);
    t.y.push_back(v[1]);
    if (has_sigma) t.sigma.push_back(v[2]);
  }
  return t;
}

inline fit::Trace load_trace(const std::filesystem::path& path, TraceSchema schema) {
  std::ifstream in(path);
  if (!in) throw DataError(path.string(), 0, "cannot open data file");
  return parse_trace(in, schema, path.string());
}

// Columns Bz_mT,freq_MHz[,sigma]; several frequencies may share one field.
inline fit::ResonanceList parse_resonances(std::istream& in, const std::string& source = "<input>") {
  const auto rows = detail::read_rows(in, source, {"Bz_mT", "freq_MHz"}, "sigma");
  if (rows.values.empty()) throw DataError(source, 0, "no data rows");
  const bool has_sigma = rows.header.size() == 3;
  std::vector<std::size_t> order(rows.values.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    const auto& x = rows.values[a];
    const auto& y = rows.values[b];
    return x[0] != y[0] ? x[0] < y[0] : x[1] < y[1];
  });
  fit::ResonanceList r;
  for (std::size_t k = 0; k < order.size(); ++k) {
    const auto& v = rows.values[order[k]];
    if (k > 0 && v[0] == r.bz_mt.back() && v[1] == r.freq_mhz.back())
      throw DataError(source, rows.lines[order[k]], "duplicate resonance row");
    if (has_sigma && !(v[2] > 0.0)) throw DataError(source, rows.lines[order[k]], "sigma must be > 0");
    r.bz_mt.push_back(v[0]);
    r.freq_mhz.push_back(v[1]);
    if (has_sigma) r.sigma.push_back(v[2]);
  }
  return r;
}

inline fit::ResonanceList load_resonances(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw DataError(path.string(), 0, "cannot open data file");
  return parse_resonances(in, path.string());
}

}  // namespace st1::io
