#pragma once

// g2(tau) of the five-level model with the pump rate and a common triplet
// population rate (gamma_ET / 3 per sublevel) as free parameters. Radiative
// rate and triplet decay rates are held fixed.
//
// The normalized g2 is invariant under pump <-> gamma_ET: its Laplace
// transform is D(0) / (s D(s)) with
//   D(s) = s + gamma_EG + gamma_ET + pump + pump gamma_ET <1 / (s + gamma_i)>,
// symmetric in the two rates. A single curve therefore has two equivalent
// minima; the reported one has the same ordering as the initial guesses.

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "st1/fitting/fit_report.hpp"
#include "st1/fitting/gammaq.hpp"
#include "st1/fitting/levmar.hpp"
#include "st1/fitting/trace.hpp"
#include "st1/ratemodel.hpp"

namespace st1::fit {

struct G2FitOptions {
  double pump_guess = 0.05;       // 1/ns
  double gamma_et_guess = 0.02;   // 1/ns
  bool free_scale = false;        // multiply the model by a fitted normalization
  LmOptions lm{};
};

inline rate::RateParams g2_params(const rate::RateParams& fixed, double pump, double gamma_et) {
  rate::RateParams p = fixed;
  p.pump = pump;
  p.population.fill(gamma_et / 3.0);
  return p;
}

inline FitReport fit_g2(const Trace& data, const rate::RateParams& fixed, const G2FitOptions& opt = {}) {
  data.validate();
  fixed.validate();
  if (!(opt.pump_guess > 0.0) || !(opt.gamma_et_guess > 0.0)) throw std::invalid_argument("initial rates must be > 0");
  if (opt.pump_guess == opt.gamma_et_guess)
    throw std::invalid_argument("pump and gamma_ET guesses must differ: their ordering selects the solution branch");
  const int n_free = opt.free_scale ? 3 : 2;
  if (data.size() < static_cast<std::size_t>(n_free + 1)) throw std::invalid_argument("too few g2 points");
  for (double t : data.x)
    if (t < 0.0) throw std::invalid_argument("g2 delays must be >= 0");

  std::vector<double> w(data.size(), 1.0);
  if (data.has_sigma())
    for (std::size_t i = 0; i < w.size(); ++i) w[i] = 1.0 / data.sigma[i];

  const ResidualFunction f = [&](const Eigen::VectorXd& th) {
    Eigen::VectorXd r(static_cast<Eigen::Index>(data.size()));
    const double pump = std::exp(std::clamp(th(0), -40.0, 10.0));
    const double get = std::exp(std::clamp(th(1), -40.0, 10.0));
    const double scale = opt.free_scale ? th(2) : 1.0;
    const auto curve = rate::g2_curve(g2_params(fixed, pump, get), data.x);
    for (std::size_t i = 0; i < data.size(); ++i)
      r(static_cast<Eigen::Index>(i)) = w[i] * (data.y[i] - scale * curve[i].y);
    return r;
  };

  Eigen::VectorXd x0(n_free);
  x0(0) = std::log(opt.pump_guess);
  x0(1) = std::log(opt.gamma_et_guess);
  if (opt.free_scale) x0(2) = 1.0;
  const LmResult lm = levenberg_marquardt(f, x0, opt.lm);

  FitReport rep;
  rep.model = opt.free_scale ? "g2 five-level (pump, gamma_ET, scale)" : "g2 five-level (pump, gamma_ET)";
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
  if (!data.has_sigma()) rep.flags.push_back("unweighted");

  const Covariance cov = scaled_covariance(lm.jacobian, lm.chi2, rep.nu);
  if (cov.rank_deficient) rep.flags.push_back("rank_deficient");
  double pump = std::exp(lm.x(0));
  double get = std::exp(lm.x(1));
  double pump_sd = pump * std::sqrt(std::max(cov.matrix(0, 0), 0.0));
  double get_sd = get * std::sqrt(std::max(cov.matrix(1, 1), 0.0));
  if ((pump > get) != (opt.pump_guess > opt.gamma_et_guess) && pump != get) {
    std::swap(pump, get);
    std::swap(pump_sd, get_sd);
    rep.flags.push_back("exchanged");
  }
  rep.params.push_back({"pump", pump, pump_sd, false});
  rep.params.push_back({"gamma_ET", get, get_sd, false});
  if (opt.free_scale) rep.params.push_back({"scale", lm.x(2), std::sqrt(std::max(cov.matrix(2, 2), 0.0)), false});
  return rep;
}

}  // namespace st1::fit
