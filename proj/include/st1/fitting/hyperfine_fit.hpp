#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>
#include <map>
#include <set>
#include <stdexcept>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "st1/fitting/fit_report.hpp"
#include "st1/fitting/gammaq.hpp"
#include "st1/fitting/levmar.hpp"
#include "st1/fitting/trace.hpp"
#include "st1/hyperfine.hpp"

namespace st1::fit {

// Parameter order: D, E, A_zz, A_perp, g.
inline constexpr std::array<const char*, 5> kHyperfineParamNames = {"D", "E", "A_zz", "A_perp", "g"};

struct HyperfineFitOptions {
  std::array<bool, 5> free{true, true, true, true, false};
  double intensity_threshold = hf::kDefaultIntensityThreshold;
  bool nuclear_zeeman = false;
  LmOptions lm{};
};

inline hf::HyperfineParams hyperfine_from_vector(const Eigen::VectorXd& v, bool nuclear_zeeman) {
  spin::TripletParams t;
  t.d = v(0);
  t.e = v(1);
  t.g = v(4);
  hf::HyperfineParams p = hf::HyperfineParams::axial(t, v(2), v(3));
  p.nuclear_zeeman = nuclear_zeeman;
  return p;
}

// Signed distance from each measured frequency to the nearest allowed model
// resonance at its field. Crossing branches can swap the nearest partner.
inline std::vector<double> nearest_resonance_residuals(const ResonanceList& data, const hf::HyperfineParams& base,
                                                       double threshold) {
  std::map<double, std::vector<hf::Resonance>> cache;
  std::vector<double> out(data.size());
  for (std::size_t i = 0; i < data.size(); ++i) {
    auto it = cache.find(data.bz_mt[i]);
    if (it == cache.end()) {
      hf::HyperfineParams p = base;
      p.triplet.field_mt = Eigen::Vector3d(0.0, 0.0, data.bz_mt[i]);
      it = cache.emplace(data.bz_mt[i], hf::hyperfine_resonances(p, {}, threshold)).first;
    }
    double best = std::numeric_limits<double>::infinity();
    for (const auto& r : it->second)
      if (std::abs(data.freq_mhz[i] - r.frequency) < std::abs(best)) best = data.freq_mhz[i] - r.frequency;
    out[i] = best;
  }
  return out;
}

inline FitReport fit_hyperfine(const ResonanceList& data, const hf::HyperfineParams& guess,
                               const HyperfineFitOptions& opt = {}) {
  data.validate();
  if (data.size() < 5) throw std::invalid_argument("hyperfine fit needs at least 5 resonance points");
  if (!guess.is_axial()) throw std::invalid_argument("hyperfine fit requires an axial A tensor guess");
  guess.triplet.validate();

  Eigen::VectorXd full(5);
  full << guess.triplet.d, guess.triplet.e, guess.a_zz, guess.a_perp(), guess.triplet.g;
  std::vector<int> idx;
  for (int k = 0; k < 5; ++k)
    if (opt.free[static_cast<std::size_t>(k)]) idx.push_back(k);
  if (idx.empty()) throw std::invalid_argument("no free hyperfine parameters");
  const int n_free = static_cast<int>(idx.size());
  if (static_cast<int>(data.size()) <= n_free) throw std::invalid_argument("more free parameters than resonance points");

  auto expand = [&](const Eigen::VectorXd& x) {
    Eigen::VectorXd v = full;
    for (int k = 0; k < n_free; ++k) v(idx[static_cast<std::size_t>(k)]) = x(k);
    return v;
  };
  const auto n = static_cast<Eigen::Index>(data.size());
  const ResidualFunction f = [&](const Eigen::VectorXd& x) {
    Eigen::VectorXd r(n);
    const hf::HyperfineParams p = hyperfine_from_vector(expand(x), opt.nuclear_zeeman);
    try {
      p.triplet.validate();
    } catch (const std::invalid_argument&) {
      r.setConstant(std::numeric_limits<double>::infinity());
      return r;
    }
    const auto res = nearest_resonance_residuals(data, p, opt.intensity_threshold);
    for (Eigen::Index i = 0; i < n; ++i) {
      const double s = data.sigma.empty() ? 1.0 : data.sigma[static_cast<std::size_t>(i)];
      r(i) = res[static_cast<std::size_t>(i)] / s;
    }
    return r;
  };

  Eigen::VectorXd x0(n_free);
  for (int k = 0; k < n_free; ++k) x0(k) = full(idx[static_cast<std::size_t>(k)]);
  LmOptions lm_opt = opt.lm;
  lm_opt.fd_step = std::max(lm_opt.fd_step, 1e-7);
  const LmResult lm = levenberg_marquardt(f, x0, lm_opt);

  FitReport rep;
  rep.model = "electro-nuclear spin Hamiltonian";
  rep.nu = static_cast<int>(data.size()) - n_free;
  rep.iterations = lm.iterations;
  if (!std::isfinite(lm.chi2)) {
    rep.status = FitStatus::failed;
    rep.chi2 = lm.chi2;
    return rep;
  }
  rep.status = lm.converged ? FitStatus::converged : FitStatus::max_iterations;
  rep.chi2 = lm.chi2;
  rep.q = goodness_of_fit(lm.chi2, rep.nu);
  if (data.sigma.empty()) rep.flags.push_back("unweighted");

  std::set<double> fields(data.bz_mt.begin(), data.bz_mt.end());
  if (fields.size() < 2) rep.flags.push_back("single_field");
  const Covariance cov = scaled_covariance(lm.jacobian, lm.chi2, rep.nu);
  if (cov.rank_deficient) rep.flags.push_back("rank_deficient");

  const Eigen::VectorXd v = expand(lm.x);
  for (int k = 0; k < 5; ++k) {
    FitParameter fp{kHyperfineParamNames[static_cast<std::size_t>(k)], v(k), 0.0, true};
    const auto pos = std::find(idx.begin(), idx.end(), k);
    if (pos != idx.end()) {
      const auto c = pos - idx.begin();
      fp.fixed = false;
      fp.uncertainty = std::sqrt(std::max(cov.matrix(c, c), 0.0));
    }
    rep.params.push_back(fp);
  }
  return rep;
}

}  // namespace st1::fit
