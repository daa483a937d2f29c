#pragma once

#include <cmath>
#include <cstddef>
#include <stdexcept>
#include <string>
#include <vector>

namespace st1::fit {

// Sampled curve. Abscissa in ns or MHz, ordinate in counts or contrast.
struct Trace {
  std::vector<double> x;
  std::vector<double> y;
  std::vector<double> sigma;  // empty when no per-point deviations are known

  std::size_t size() const { return x.size(); }
  bool has_sigma() const { return !sigma.empty(); }

  void validate() const {
    if (x.size() != y.size()) throw std::invalid_argument("trace abscissa and ordinate lengths differ");
    if (has_sigma() && sigma.size() != x.size()) throw std::invalid_argument("trace sigma length differs");
    for (std::size_t i = 0; i < x.size(); ++i) {
      if (!std::isfinite(x[i]) || !std::isfinite(y[i])) throw std::invalid_argument("trace values must be finite");
      if (i > 0 && !(x[i] > x[i - 1])) throw std::invalid_argument("trace abscissa must be strictly increasing");
      if (has_sigma() && !(sigma[i] > 0.0 && std::isfinite(sigma[i])))
        throw std::invalid_argument("trace sigma must be finite and > 0");
    }
  }
};

// Measured (B_z, frequency) pairs; several resonances may share a field value.
struct ResonanceList {
  std::vector<double> bz_mt;
  std::vector<double> freq_mhz;
  std::vector<double> sigma;

  std::size_t size() const { return bz_mt.size(); }

  void validate() const {
    if (bz_mt.size() != freq_mhz.size()) throw std::invalid_argument("resonance list column lengths differ");
    if (!sigma.empty() && sigma.size() != bz_mt.size()) throw std::invalid_argument("resonance sigma length differs");
    for (std::size_t i = 0; i < bz_mt.size(); ++i) {
      if (!std::isfinite(bz_mt[i]) || !std::isfinite(freq_mhz[i]))
        throw std::invalid_argument("resonance values must be finite");
      if (!sigma.empty() && !(sigma[i] > 0.0)) throw std::invalid_argument("resonance sigma must be > 0");
    }
  }
};

}  // namespace st1::fit
