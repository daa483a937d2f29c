#pragma once

#include <algorithm>
#include <stdexcept>
#include <string>
#include <vector>

namespace st1::fit {

struct FitParameter {
  std::string name;
  double value = 0.0;
  double uncertainty = 0.0;  // 1 sigma; zero for fixed parameters
  bool fixed = false;
};

enum class FitStatus { converged, max_iterations, failed };

inline std::string to_string(FitStatus s) {
  switch (s) {
    case FitStatus::converged: return "converged";
    case FitStatus::max_iterations: return "max_iterations";
    case FitStatus::failed: return "failed";
  }
  return "unknown";
}

struct FitReport {
  std::string model;
  std::vector<FitParameter> params;
  double chi2 = 0.0;
  int nu = 0;
  double q = 0.0;
  FitStatus status = FitStatus::failed;
  int iterations = 0;
  std::vector<std::string> flags;

  bool converged() const { return status == FitStatus::converged; }

  bool has_flag(const std::string& f) const { return std::find(flags.begin(), flags.end(), f) != flags.end(); }

  const FitParameter& param(const std::string& name) const {
    for (const auto& p : params)
      if (p.name == name) return p;
    throw std::out_of_range("no fit parameter named " + name);
  }

  double value(const std::string& name) const { return param(name).value; }
};

}  // namespace st1::fit
