#pragma once

// Sums of exponentials fitted by variable projection: amplitudes (and the
// optional baseline) are solved by weighted linear least squares at fixed
// time constants, and only ln(tau / span) is optimized nonlinearly.
//
//   rising:   y(t) = c0 + sum_i A_i (1 - exp(-t / tau_i))
//   decaying: y(t) = c0 + sum_i A_i exp(-t / tau_i)

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numeric>
#include <random>
#include <stdexcept>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "st1/fitting/fit_report.hpp"
#include "st1/fitting/gammaq.hpp"
#include "st1/fitting/levmar.hpp"
#include "st1/fitting/trace.hpp"

namespace st1::fit {

enum class ExpForm { rising, decaying };

inline std::string to_string(ExpForm f) { return f == ExpForm::rising ? "rising" : "decaying"; }

struct MultiExpOptions {
  ExpForm form = ExpForm::rising;
  bool baseline = true;
  int seed_sets = 5;
  LmOptions lm{};
};

struct MultiExpResult {
  FitReport report;
  std::vector<double> tau;
  std::vector<double> tau_sigma;
  std::vector<double> amplitude;
  std::vector<double> amplitude_sigma;
  double baseline = 0.0;
  double baseline_sigma = 0.0;
  std::vector<double> weights;  // 1 / sigma per point

  double evaluate(double t, ExpForm form) const {
    double v = baseline;
    for (std::size_t i = 0; i < tau.size(); ++i) {
      const double e = std::exp(-t / tau[i]);
      v += amplitude[i] * (form == ExpForm::rising ? 1.0 - e : e);
    }
    return v;
  }
};

inline std::vector<double> point_weights(const Trace& data) {
  std::vector<double> w(data.size());
  for (std::size_t i = 0; i < data.size(); ++i)
    w[i] = 1.0 / (data.has_sigma() ? data.sigma[i] : std::sqrt(std::max(data.y[i], 1.0)));
  return w;
}

inline double exp_basis(double t, double tau, ExpForm form) {
  const double e = std::exp(-t / tau);
  return form == ExpForm::rising ? 1.0 - e : e;
}

namespace detail {

inline constexpr double kLogTauLimit = 40.0;

struct VarPro {
  const Trace& data;
  const std::vector<double>& w;
  ExpForm form;
  bool baseline;
  double span;

  double tau_of(double theta) const { return span * std::exp(std::clamp(theta, -kLogTauLimit, kLogTauLimit)); }

  Eigen::MatrixXd design(const Eigen::VectorXd& theta) const {
    const auto n = static_cast<Eigen::Index>(data.size());
    const Eigen::Index k = theta.size();
    Eigen::MatrixXd a(n, k + (baseline ? 1 : 0));
    for (Eigen::Index i = 0; i < n; ++i) {
      for (Eigen::Index c = 0; c < k; ++c) a(i, c) = w[i] * exp_basis(data.x[i], tau_of(theta(c)), form);
      if (baseline) a(i, k) = w[i];
    }
    return a;
  }

  Eigen::VectorXd weighted_y() const {
    Eigen::VectorXd b(static_cast<Eigen::Index>(data.size()));
    for (std::size_t i = 0; i < data.size(); ++i) b(static_cast<Eigen::Index>(i)) = w[i] * data.y[i];
    return b;
  }

  Eigen::VectorXd linear(const Eigen::VectorXd& theta) const {
    return design(theta).colPivHouseholderQr().solve(weighted_y());
  }

  Eigen::VectorXd residuals(const Eigen::VectorXd& theta) const {
    const Eigen::MatrixXd a = design(theta);
    const Eigen::VectorXd b = weighted_y();
    return b - a * a.colPivHouseholderQr().solve(b);
  }
};

inline std::vector<Eigen::VectorXd> seed_sets(const Trace& data, int k, int count, double span) {
  double lo = span;
  for (double x : data.x)
    if (x > 0.0) {
      lo = std::min(lo, x);
      break;
    }
  for (std::size_t i = 1; i < data.size(); ++i) lo = std::min(lo, std::max(data.x[i] - data.x[i - 1], 1e-12 * span));
  lo = std::max(lo, 1e-6 * span);
  const double llo = std::log(lo / span);
  const double lhi = 0.0;
  std::vector<Eigen::VectorXd> seeds;
  for (int s = 0; s < count; ++s) {
    const double shift = count > 1 ? -0.35 + 0.7 * s / (count - 1) : 0.0;
    Eigen::VectorXd theta(k);
    for (int i = 0; i < k; ++i) theta(i) = llo + (lhi - llo) * (i + 1.0 + shift) / (k + 1.0);
    seeds.push_back(theta);
  }
  return seeds;
}

}  // namespace detail

inline MultiExpResult fit_multiexp(const Trace& data, int n_components, const MultiExpOptions& opt = {}) {
  data.validate();
  if (n_components < 1 || n_components > 3) throw std::invalid_argument("number of components must be 1, 2 or 3");
  const int n_linear = n_components + (opt.baseline ? 1 : 0);
  const int n_free = n_components + n_linear;
  if (data.size() < static_cast<std::size_t>(2 * n_components + 2))
    throw std::invalid_argument("too few points for a " + std::to_string(n_components) + "-component fit");
  const double span = data.x.back() - data.x.front();
  if (!(span > 0.0)) throw std::invalid_argument("trace abscissa span must be > 0");

  const std::vector<double> w = point_weights(data);
  const detail::VarPro vp{data, w, opt.form, opt.baseline, span};
  const ResidualFunction f = [&vp](const Eigen::VectorXd& theta) { return vp.residuals(theta); };

  LmResult best;
  best.chi2 = std::numeric_limits<double>::infinity();
  int total_iterations = 0;
  for (const auto& seed : detail::seed_sets(data, n_components, std::max(opt.seed_sets, 1), span)) {
    LmResult r = levenberg_marquardt(f, seed, opt.lm);
    total_iterations += r.iterations;
    if (r.chi2 < best.chi2) best = std::move(r);
  }

  MultiExpResult out;
  out.weights = w;
  FitReport& rep = out.report;
  rep.model = std::to_string(n_components) + "-exp " + to_string(opt.form) + (opt.baseline ? "+baseline" : "");
  rep.iterations = total_iterations;
  rep.nu = static_cast<int>(data.size()) - n_free;
  if (!std::isfinite(best.chi2)) {
    rep.status = FitStatus::failed;
    rep.chi2 = best.chi2;
    rep.q = 0.0;
    return out;
  }
  rep.status = best.converged ? FitStatus::converged : FitStatus::max_iterations;
  rep.chi2 = best.chi2;
  rep.q = goodness_of_fit(best.chi2, rep.nu);

  const Eigen::VectorXd lin = vp.linear(best.x);
  std::vector<int> order(static_cast<std::size_t>(n_components));
  std::iota(order.begin(), order.end(), 0);
  std::vector<double> tau(order.size());
  for (int i = 0; i < n_components; ++i) tau[static_cast<std::size_t>(i)] = vp.tau_of(best.x(i));
  std::sort(order.begin(), order.end(), [&](int a, int b) { return tau[static_cast<std::size_t>(a)] < tau[static_cast<std::size_t>(b)]; });
  for (int i : order) {
    out.tau.push_back(tau[static_cast<std::size_t>(i)]);
    out.amplitude.push_back(lin(i));
  }
  out.baseline = opt.baseline ? lin(n_components) : 0.0;

  // Full Jacobian in (tau_1.., A_1.., c0) for the covariance.
  const auto n = static_cast<Eigen::Index>(data.size());
  Eigen::MatrixXd j(n, n_free);
  for (Eigen::Index p = 0; p < n; ++p) {
    const double t = data.x[static_cast<std::size_t>(p)];
    for (int c = 0; c < n_components; ++c) {
      const double tc = out.tau[static_cast<std::size_t>(c)];
      const double e = std::exp(-t / tc);
      const double dtau = (opt.form == ExpForm::rising ? -1.0 : 1.0) * out.amplitude[static_cast<std::size_t>(c)] * e * t / (tc * tc);
      j(p, c) = w[static_cast<std::size_t>(p)] * dtau;
      j(p, n_components + c) = w[static_cast<std::size_t>(p)] * exp_basis(t, tc, opt.form);
    }
    if (opt.baseline) j(p, 2 * n_components) = w[static_cast<std::size_t>(p)];
  }
  const Covariance cov = scaled_covariance(j, rep.chi2, rep.nu);
  if (cov.rank_deficient) rep.flags.push_back("rank_deficient");
  auto sd = [&](int k) { return std::sqrt(std::max(cov.matrix(k, k), 0.0)); };
  for (int c = 0; c < n_components; ++c) {
    out.tau_sigma.push_back(sd(c));
    out.amplitude_sigma.push_back(sd(n_components + c));
  }
  if (opt.baseline) out.baseline_sigma = sd(2 * n_components);

  for (int c = 0; c < n_components; ++c)
    rep.params.push_back({"tau" + std::to_string(c + 1), out.tau[static_cast<std::size_t>(c)], out.tau_sigma[static_cast<std::size_t>(c)], false});
  for (int c = 0; c < n_components; ++c)
    rep.params.push_back({"A" + std::to_string(c + 1), out.amplitude[static_cast<std::size_t>(c)], out.amplitude_sigma[static_cast<std::size_t>(c)], false});
  if (opt.baseline) rep.params.push_back({"c0", out.baseline, out.baseline_sigma, false});

  for (std::size_t c = 1; c < out.tau.size(); ++c)
    if (out.tau[c] < 1.01 * out.tau[c - 1]) {
      rep.flags.push_back("degenerate_tau");
      break;
    }
  for (std::size_t c = 0; c < out.tau.size(); ++c)
    if (std::abs(std::log(out.tau[c] / span)) > detail::kLogTauLimit - 1.0) {
      rep.flags.push_back("tau_unbounded");
      break;
    }
  return out;
}

// Joint fit of several traces that share their time constants; amplitudes
// and baselines are per trace.
struct SharedMultiExpResult {
  FitReport report;
  std::vector<double> tau;
  std::vector<double> tau_sigma;
  std::vector<std::vector<double>> amplitude;  // [trace][component]
  std::vector<std::vector<double>> amplitude_sigma;
  std::vector<double> baseline;
};

inline SharedMultiExpResult fit_multiexp_shared(const std::vector<Trace>& traces, int n_components,
                                                const MultiExpOptions& opt = {}) {
  if (traces.empty()) throw std::invalid_argument("no traces to fit");
  if (n_components < 1 || n_components > 3) throw std::invalid_argument("number of components must be 1, 2 or 3");
  double span = 0.0;
  std::vector<std::vector<double>> w;
  for (const auto& t : traces) {
    t.validate();
    if (t.size() < static_cast<std::size_t>(2 * n_components + 2))
      throw std::invalid_argument("too few points in a trace for a " + std::to_string(n_components) + "-component fit");
    span = std::max(span, t.x.back() - t.x.front());
    w.push_back(point_weights(t));
  }
  if (!(span > 0.0)) throw std::invalid_argument("trace abscissa span must be > 0");
  const int per_trace = n_components + (opt.baseline ? 1 : 0);
  const auto m = static_cast<int>(traces.size());
  const int n_free = n_components + m * per_trace;
  std::size_t n_points = 0;
  for (const auto& t : traces) n_points += t.size();

  std::vector<detail::VarPro> vps;
  for (int r = 0; r < m; ++r)
    vps.push_back({traces[static_cast<std::size_t>(r)], w[static_cast<std::size_t>(r)], opt.form, opt.baseline, span});
  const ResidualFunction f = [&](const Eigen::VectorXd& theta) {
    Eigen::VectorXd out(static_cast<Eigen::Index>(n_points));
    Eigen::Index at = 0;
    for (const auto& vp : vps) {
      const Eigen::VectorXd r = vp.residuals(theta);
      out.segment(at, r.size()) = r;
      at += r.size();
    }
    return out;
  };

  // Seeds from the union of abscissae.
  Trace grid;
  for (const auto& t : traces) grid.x.insert(grid.x.end(), t.x.begin(), t.x.end());
  std::sort(grid.x.begin(), grid.x.end());
  grid.x.erase(std::unique(grid.x.begin(), grid.x.end()), grid.x.end());
  LmResult best;
  best.chi2 = std::numeric_limits<double>::infinity();
  int total_iterations = 0;
  for (const auto& seed : detail::seed_sets(grid, n_components, std::max(opt.seed_sets, 1), span)) {
    LmResult r = levenberg_marquardt(f, seed, opt.lm);
    total_iterations += r.iterations;
    if (r.chi2 < best.chi2) best = std::move(r);
  }

  SharedMultiExpResult out;
  FitReport& rep = out.report;
  rep.model = std::to_string(n_components) + "-exp " + to_string(opt.form) + (opt.baseline ? "+baseline" : "") +
              " shared over " + std::to_string(m) + " traces";
  rep.iterations = total_iterations;
  rep.nu = static_cast<int>(n_points) - n_free;
  if (!std::isfinite(best.chi2) || rep.nu < 1) {
    rep.status = FitStatus::failed;
    rep.chi2 = best.chi2;
    return out;
  }
  rep.status = best.converged ? FitStatus::converged : FitStatus::max_iterations;
  rep.chi2 = best.chi2;
  rep.q = goodness_of_fit(best.chi2, rep.nu);

  std::vector<int> order(static_cast<std::size_t>(n_components));
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(), [&](int a, int b) { return best.x(a) < best.x(b); });
  for (int i : order) out.tau.push_back(vps[0].tau_of(best.x(i)));
  for (const auto& vp : vps) {
    const Eigen::VectorXd lin = vp.linear(best.x);
    std::vector<double> a;
    for (int i : order) a.push_back(lin(i));
    out.amplitude.push_back(a);
    out.baseline.push_back(opt.baseline ? lin(n_components) : 0.0);
  }

  Eigen::MatrixXd j = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(n_points), n_free);
  Eigen::Index row = 0;
  for (int r = 0; r < m; ++r) {
    const auto& t = traces[static_cast<std::size_t>(r)];
    const int col0 = n_components + r * per_trace;
    for (std::size_t p = 0; p < t.size(); ++p, ++row) {
      const double wp = w[static_cast<std::size_t>(r)][p];
      for (int c = 0; c < n_components; ++c) {
        const double tc = out.tau[static_cast<std::size_t>(c)];
        const double e = std::exp(-t.x[p] / tc);
        const double a = out.amplitude[static_cast<std::size_t>(r)][static_cast<std::size_t>(c)];
        j(row, c) += wp * (opt.form == ExpForm::rising ? -1.0 : 1.0) * a * e * t.x[p] / (tc * tc);
        j(row, col0 + c) = wp * exp_basis(t.x[p], tc, opt.form);
      }
      if (opt.baseline) j(row, col0 + n_components) = wp;
    }
  }
  const Covariance cov = scaled_covariance(j, rep.chi2, rep.nu);
  if (cov.rank_deficient) rep.flags.push_back("rank_deficient");
  auto sd = [&](int k) { return std::sqrt(std::max(cov.matrix(k, k), 0.0)); };
  for (int c = 0; c < n_components; ++c) {
    out.tau_sigma.push_back(sd(c));
    rep.params.push_back({"tau" + std::to_string(c + 1), out.tau[static_cast<std::size_t>(c)], sd(c), false});
  }
  for (int r = 0; r < m; ++r) {
    std::vector<double> s;
    const int col0 = n_components + r * per_trace;
    for (int c = 0; c < n_components; ++c) {
      s.push_back(sd(col0 + c));
      rep.params.push_back({"A" + std::to_string(c + 1) + "_" + std::to_string(r + 1),
                            out.amplitude[static_cast<std::size_t>(r)][static_cast<std::size_t>(c)], sd(col0 + c), false});
    }
    if (opt.baseline)
      rep.params.push_back({"c0_" + std::to_string(r + 1), out.baseline[static_cast<std::size_t>(r)],
                            sd(col0 + n_components), false});
    out.amplitude_sigma.push_back(s);
  }
  for (std::size_t c = 1; c < out.tau.size(); ++c)
    if (out.tau[c] < 1.01 * out.tau[c - 1]) {
      rep.flags.push_back("degenerate_tau");
      break;
    }
  return out;
}

struct ModelSelection {
  int chosen = 0;  // number of components
  std::vector<MultiExpResult> fits;
  std::vector<std::string> warnings;

  const MultiExpResult& best() const {
    for (const auto& f : fits)
      if (static_cast<int>(f.tau.size()) == chosen) return f;
    throw std::logic_error("no fit for the chosen model");
  }
};

inline constexpr double kRejectQ = 1e-10;
inline constexpr double kMinorAmplitudeFraction = 0.1;

// Fits 1, 2 and 3 components, rejects Q < 1e-10 and keeps the smallest acceptable model.
inline ModelSelection model_select(const Trace& data, const MultiExpOptions& opt = {}, int max_components = 3) {
  ModelSelection sel;
  for (int k = 1; k <= std::min(max_components, 3); ++k) {
    if (data.size() < static_cast<std::size_t>(2 * k + 2 + (opt.baseline ? 1 : 0))) break;
    sel.fits.push_back(fit_multiexp(data, k, opt));
  }
  if (sel.fits.empty()) throw std::invalid_argument("too few points for any exponential model");

  for (auto& f : sel.fits) {
    if (f.tau.size() != 3) continue;
    std::vector<double> a;
    for (double v : f.amplitude) a.push_back(std::abs(v));
    std::sort(a.begin(), a.end());
    if (a[0] < kMinorAmplitudeFraction * a[1]) {
      f.report.flags.push_back("minor_component");
      sel.warnings.push_back("3-component fit has one amplitude below 10% of the others");
    }
  }
  for (const auto& f : sel.fits)
    if (f.report.q >= kRejectQ && f.report.status != FitStatus::failed) {
      sel.chosen = static_cast<int>(f.tau.size());
      return sel;
    }
  const auto it = std::max_element(sel.fits.begin(), sel.fits.end(),
                                   [](const MultiExpResult& a, const MultiExpResult& b) { return a.report.q < b.report.q; });
  sel.chosen = static_cast<int>(it->tau.size());
  sel.warnings.push_back("all models rejected (Q < 1e-10); returning the best Q");
  return sel;
}

struct SharedModelSelection {
  int chosen = 0;
  std::vector<SharedMultiExpResult> fits;
  std::vector<std::string> warnings;

  const SharedMultiExpResult& best() const {
    for (const auto& f : fits)
      if (static_cast<int>(f.tau.size()) == chosen) return f;
    throw std::logic_error("no fit for the chosen model");
  }
};

// model_select for a set of traces sharing their time constants.
inline SharedModelSelection model_select_shared(const std::vector<Trace>& traces, const MultiExpOptions& opt = {},
                                                int max_components = 3) {
  SharedModelSelection sel;
  std::size_t shortest = std::numeric_limits<std::size_t>::max();
  for (const auto& t : traces) shortest = std::min(shortest, t.size());
  for (int k = 1; k <= std::min(max_components, 3); ++k) {
    if (shortest < static_cast<std::size_t>(2 * k + 2)) break;
    sel.fits.push_back(fit_multiexp_shared(traces, k, opt));
  }
  if (sel.fits.empty()) throw std::invalid_argument("too few points for any exponential model");
  for (const auto& f : sel.fits)
    if (f.report.q >= kRejectQ && f.report.status != FitStatus::failed) {
      sel.chosen = static_cast<int>(f.tau.size());
      return sel;
    }
  const auto it = std::max_element(sel.fits.begin(), sel.fits.end(), [](const auto& a, const auto& b) {
    return a.report.q < b.report.q;
  });
  sel.chosen = static_cast<int>(it->tau.size());
  sel.warnings.push_back("all models rejected (Q < 1e-10); returning the best Q");
  return sel;
}

struct BootstrapResult {
  std::vector<std::string> names;
  std::vector<double> mean;
  std::vector<double> sd;
  std::vector<std::vector<double>> samples;  // per replicate, in report parameter order
  int failures = 0;
};

// Parametric bootstrap around a fit: Poisson resampling of count data or
// Gaussian resampling when per-point sigma is supplied.
inline BootstrapResult bootstrap_multiexp(const Trace& data, const MultiExpResult& fit, const MultiExpOptions& opt,
                                          int replicates, std::uint64_t seed) {
  if (replicates < 2) throw std::invalid_argument("bootstrap needs at least 2 replicates");
  std::mt19937_64 rng(seed);
  BootstrapResult b;
  for (const auto& p : fit.report.params) b.names.push_back(p.name);
  const int k = static_cast<int>(fit.tau.size());
  for (int r = 0; r < replicates; ++r) {
    Trace t = data;
    for (std::size_t i = 0; i < t.size(); ++i) {
      const double m = fit.evaluate(t.x[i], opt.form);
      if (data.has_sigma()) {
        std::normal_distribution<double> g(m, data.sigma[i]);
        t.y[i] = g(rng);
      } else {
        std::poisson_distribution<long long> pd(std::max(m, 0.0));
        t.y[i] = static_cast<double>(pd(rng));
      }
    }
    const MultiExpResult rf = fit_multiexp(t, k, opt);
    if (rf.report.status == FitStatus::failed) {
      ++b.failures;
      continue;
    }
    std::vector<double> v;
    for (const auto& p : rf.report.params) v.push_back(p.value);
    b.samples.push_back(std::move(v));
  }
  const std::size_t np = b.names.size();
  b.mean.assign(np, 0.0);
  b.sd.assign(np, 0.0);
  if (b.samples.size() < 2) return b;
  for (const auto& s : b.samples)
    for (std::size_t i = 0; i < np; ++i) b.mean[i] += s[i];
  for (auto& m : b.mean) m /= static_cast<double>(b.samples.size());
  for (const auto& s : b.samples)
    for (std::size_t i = 0; i < np; ++i) b.sd[i] += (s[i] - b.mean[i]) * (s[i] - b.mean[i]);
  for (auto& v : b.sd) v = std::sqrt(v / static_cast<double>(b.samples.size() - 1));
  return b;
}

}  // namespace st1::fit
