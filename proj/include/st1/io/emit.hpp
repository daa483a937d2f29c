#pragma once

#include <algorithm>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <ostream>
#include <string>
#include <vector>

#include "json.hpp"
#include "st1/fitting/fit_report.hpp"
#include "st1/io/errors.hpp"

namespace st1::io {

using ordered_json = nlohmann::ordered_json;

inline std::string format_number(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.12g", v);
  return buf;
}

struct Table {
  std::vector<std::string> header;
  std::vector<std::vector<double>> rows;
};

inline std::string to_csv(const Table& t) {
  std::string out;
  for (std::size_t i = 0; i < t.header.size(); ++i) out += (i ? "," : "") + t.header[i];
  out += "\n";
  for (const auto& row : t.rows) {
    if (row.size() != t.header.size()) throw std::invalid_argument("table row width differs from header");
    for (std::size_t i = 0; i < row.size(); ++i) out += (i ? "," : "") + format_number(row[i]);
    out += "\n";
  }
  return out;
}

inline ordered_json to_json(const fit::FitReport& r) {
  ordered_json j;
  j["model"] = r.model;
  ordered_json params = ordered_json::object();
  ordered_json unc = ordered_json::object();
  for (const auto& p : r.params) {
    params[p.name] = p.value;
    unc[p.name] = p.uncertainty;
  }
  j["params"] = params;
  j["uncertainties"] = unc;
  j["chi2"] = r.chi2;
  j["nu"] = r.nu;
  j["Q"] = r.q;
  j["status"] = fit::to_string(r.status);
  j["iterations"] = r.iterations;
  ordered_json fixed = ordered_json::array();
  for (const auto& p : r.params)
    if (p.fixed) fixed.push_back(p.name);
  j["fixed"] = fixed;
  j["flags"] = r.flags;
  return j;
}

inline fit::FitReport fit_report_from_json(const ordered_json& j) {
  fit::FitReport r;
  r.model = j.at("model").get<std::string>();
  const auto& unc = j.at("uncertainties");
  std::vector<std::string> fixed;
  if (j.contains("fixed")) fixed = j.at("fixed").get<std::vector<std::string>>();
  for (const auto& [name, value] : j.at("params").items()) {
    fit::FitParameter p{name, value.get<double>(), unc.at(name).get<double>(), false};
    p.fixed = std::find(fixed.begin(), fixed.end(), name) != fixed.end();
    r.params.push_back(p);
  }
  r.chi2 = j.at("chi2").get<double>();
  r.nu = j.at("nu").get<int>();
  r.q = j.at("Q").get<double>();
  const auto status = j.at("status").get<std::string>();
  r.status = status == "converged"        ? fit::FitStatus::converged
             : status == "max_iterations" ? fit::FitStatus::max_iterations
                                          : fit::FitStatus::failed;
  if (j.contains("iterations")) r.iterations = j.at("iterations").get<int>();
  if (j.contains("flags")) r.flags = j.at("flags").get<std::vector<std::string>>();
  return r;
}

inline std::string dump_json(const ordered_json& j) { return j.dump(2) + "\n"; }

// Writes to `path`, or to `fallback` when the path is empty or "-".
inline void write_output(const std::string& path, const std::string& content, std::ostream& fallback = std::cout) {
  if (path.empty() || path == "-") {
    fallback << content;
    fallback.flush();
    return;
  }
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw DataError(path, 0, "cannot open output file for writing");
  out << content;
  out.flush();
  if (!out) throw DataError(path, 0, "write failed");
}

}  // namespace st1::io
