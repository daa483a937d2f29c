#pragma once

// Ten-level rate model of optical nuclear polarization and readout at the
// triplet level anti-crossing. Electron spin relaxation and the admixture of
// |+1, m_I> into the LAC eigenstates are not modeled. Times in ns, rates in 1/ns.
//
// Level order:
//   0 |G,+1/2>   1 |G,-1/2>   2 |E,+1/2>   3 |E,-1/2>
//   4 |+1,+1/2>  5 |+1,-1/2>  6 |0,+1/2>   7 |-1,-1/2>
//   8 |I>  = alpha|-1,+1/2> + beta|0,-1/2>
//   9 |II> = alpha|0,-1/2>  - beta|-1,+1/2>

#include <algorithm>
#include <array>
#include <cmath>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "st1/expm.hpp"

namespace st1::onp {

enum Level : int {
  ground_up = 0,
  ground_down,
  excited_up,
  excited_down,
  plus1_up,
  plus1_down,
  zero_up,
  minus1_down,
  mixed_i,
  mixed_ii,
};

inline constexpr int kLevels = 10;
using Vector = Eigen::Matrix<double, kLevels, 1>;
using Generator = Eigen::Matrix<double, kLevels, kLevels>;

inline const char* level_name(int l) {
  static constexpr const char* names[kLevels] = {"G+1/2", "G-1/2", "E+1/2", "E-1/2", "+1,+1/2",
                                                 "+1,-1/2", "0,+1/2", "-1,-1/2", "I", "II"};
  return names[l];
}

struct OnpRates {
  double population = 0.0;    // gamma: per-sublevel triplet population rate away from the LAC
  double decay_plus1 = 0.0;   // gamma_{+1}
  double decay_zero = 0.0;    // gamma_0
  double decay_minus1 = 0.0;  // gamma_{-1}
  double pump = 0.0;
  double radiative = 0.0;

  void validate() const {
    for (double r : {population, decay_plus1, decay_zero, decay_minus1, pump})
      if (!std::isfinite(r) || r < 0.0) throw std::invalid_argument("ONP rates must be finite and >= 0");
    if (!std::isfinite(radiative) || radiative <= 0.0) throw std::invalid_argument("radiative rate must be > 0");
  }
};

struct Mixing {
  double alpha = 1.0;
  double beta = 0.0;

  static Mixing lac_center() { return {1.0 / std::sqrt(2.0), 1.0 / std::sqrt(2.0)}; }
};

// Lifetimes 200 / 2500 / 1000 ns for m_s = +1 / 0 / -1, gamma = (170 ns)^-1 per
// sublevel, radiative (10 ns)^-1 and a saturating pump of ten times the
// radiative rate.
inline OnpRates reference_onp_rates() {
  return {1.0 / 170.0, 1.0 / 200.0, 1.0 / 2500.0, 1.0 / 1000.0, 1.0, 0.1};
}

class OnpModel {
 public:
  OnpModel(const OnpRates& rates, Mixing mixing) : rates_(rates), mixing_(mixing) {
    rates_.validate();
    if (!std::isfinite(mixing.alpha) || !std::isfinite(mixing.beta) ||
        std::abs(mixing.alpha * mixing.alpha + mixing.beta * mixing.beta - 1.0) > 1e-9)
      throw std::invalid_argument("mixing coefficients must satisfy alpha^2 + beta^2 = 1");
    pumped_ = build(rates_.pump);
    dark_ = build(0.0);
  }

  const OnpRates& rates() const { return rates_; }
  const Mixing& mixing() const { return mixing_; }

  // dn/dt = M n; columns sum to zero.
  const Generator& generator(bool pump_on = true) const { return pump_on ? pumped_ : dark_; }

  // Rate of the i -> j transition.
  double rate(int from, int to) const { return pumped_(to, from); }

  Vector propagate(const Vector& n, double t, bool pump_on = true) const {
    if (!(t >= 0.0) || !std::isfinite(t)) throw std::invalid_argument("propagation time must be finite and >= 0");
    if (t == 0.0) return n;
    return expm(generator(pump_on) * t) * n;
  }

  // Integral of radiative * (n_E+ + n_E-) over [0, t] and the final populations.
  std::pair<Vector, double> propagate_integrating(const Vector& n, double t, bool pump_on = true) const {
    Eigen::MatrixXd aug = Eigen::MatrixXd::Zero(kLevels + 1, kLevels + 1);
    aug.topLeftCorner(kLevels, kLevels) = generator(pump_on);
    aug(kLevels, excited_up) = rates_.radiative;
    aug(kLevels, excited_down) = rates_.radiative;
    Eigen::VectorXd z = Eigen::VectorXd::Zero(kLevels + 1);
    z.head(kLevels) = n;
    const Eigen::VectorXd out = expm(aug * t) * z;
    return {out.head(kLevels), out(kLevels)};
  }

  // Stationary distribution of the pumped generator (null vector of M).
  Vector steady_state() const {
    Eigen::Matrix<double, kLevels + 1, kLevels> a;
    a.topRows(kLevels) = pumped_;
    a.row(kLevels).setOnes();
    Eigen::Matrix<double, kLevels + 1, 1> rhs = Eigen::Matrix<double, kLevels + 1, 1>::Zero();
    rhs(kLevels) = 1.0;
    return a.colPivHouseholderQr().solve(rhs);
  }

  // Ground-state populations once every excited and triplet level has decayed
  // with the pump off, from branching ratios.
  std::array<double, 2> asymptotic_ground(const Vector& n) const {
    const Generator& m = dark_;
    auto to_ground = [&](int l) -> std::array<double, 2> {
      const double out = -m(l, l);
      if (out == 0.0) return {0.0, 0.0};
      return {m(ground_up, l) / out, m(ground_down, l) / out};
    };
    std::array<double, kLevels> up{}, down{};
    up[ground_up] = 1.0;
    down[ground_down] = 1.0;
    for (int l = plus1_up; l < kLevels; ++l) {
      auto b = to_ground(l);
      up[l] = b[0];
      down[l] = b[1];
    }
    for (int l : {excited_up, excited_down}) {
      const double out = -m(l, l);
      for (int j = 0; j < kLevels; ++j) {
        if (j == l || m(j, l) == 0.0) continue;
        up[l] += m(j, l) / out * up[j];
        down[l] += m(j, l) / out * down[j];
      }
    }
    std::array<double, 2> g{0.0, 0.0};
    for (int l = 0; l < kLevels; ++l) {
      g[0] += up[l] * n(l);
      g[1] += down[l] * n(l);
    }
    return g;
  }

 private:
  Generator build(double pump) const {
    Generator m = Generator::Zero();
    auto add = [&m](int from, int to, double r) {
      m(to, from) += r;
      m(from, from) -= r;
    };
    const double g = rates_.population;
    const double a2 = mixing_.alpha * mixing_.alpha;
    const double b2 = mixing_.beta * mixing_.beta;
    add(ground_up, excited_up, pump);
    add(ground_down, excited_down, pump);
    add(excited_up, ground_up, rates_.radiative);
    add(excited_down, ground_down, rates_.radiative);
    // population of unmixed levels
    add(excited_up, plus1_up, g);
    add(excited_down, plus1_down, g);
    add(excited_up, zero_up, g);
    add(excited_down, minus1_down, g);
    // population of the mixed levels
    add(excited_up, mixed_i, a2 * g);
    add(excited_down, mixed_i, b2 * g);
    add(excited_up, mixed_ii, b2 * g);
    add(excited_down, mixed_ii, a2 * g);
    // decay of unmixed levels
    add(plus1_up, ground_up, rates_.decay_plus1);
    add(plus1_down, ground_down, rates_.decay_plus1);
    add(zero_up, ground_up, rates_.decay_zero);
    add(minus1_down, ground_down, rates_.decay_minus1);
    // decay of the mixed levels
    add(mixed_i, ground_up, a2 * rates_.decay_minus1);
    add(mixed_i, ground_down, b2 * rates_.decay_zero);
    add(mixed_ii, ground_up, b2 * rates_.decay_minus1);
    add(mixed_ii, ground_down, a2 * rates_.decay_zero);
    // electron spin relaxation between triplet levels would enter here
    return m;
  }

  OnpRates rates_;
  Mixing mixing_;
  Generator pumped_;
  Generator dark_;
};

inline OnpModel build_onp_model(const OnpRates& rates, Mixing mixing) { return OnpModel(rates, mixing); }

inline Vector ground_state(double polarization = 0.0) {
  if (polarization < -1.0 || polarization > 1.0) throw std::invalid_argument("polarization must be in [-1, 1]");
  Vector n = Vector::Zero();
  n(ground_up) = 0.5 * (1.0 + polarization);
  n(ground_down) = 0.5 * (1.0 - polarization);
  return n;
}

inline double ground_polarization(const Vector& n) {
  const double s = n(ground_up) + n(ground_down);
  return s > 0.0 ? (n(ground_up) - n(ground_down)) / s : 0.0;
}

inline double excited_and_triplet(const Vector& n) { return n.tail(kLevels - 2).sum(); }

struct PolarizeOptions {
  double pump_duration = 50000.0;      // ns
  double initial_polarization = 0.0;
  double decay_threshold = 1e-9;       // remaining excited + triplet occupancy
};

struct PolarizationResult {
  Vector pumped;           // populations at the end of the pump
  Vector relaxed;          // after decay in the dark
  double decay_time = 0.0; // ns until the excited + triplet occupancy fell below threshold
  double n_up = 0.0;
  double n_down = 0.0;
  double polarization = 0.0;
};

// Pump for `pump_duration`, then let everything decay to the ground state.
inline PolarizationResult polarize(const OnpModel& model, const PolarizeOptions& opt = {}) {
  PolarizationResult r;
  r.pumped = model.propagate(ground_state(opt.initial_polarization), opt.pump_duration, true);
  // Double the dark interval until the threshold is met, then bisect.
  double hi = 1000.0;
  Vector n = model.propagate(r.pumped, hi, false);
  while (excited_and_triplet(n) >= opt.decay_threshold * n.sum()) {
    if (hi > 1e9) throw std::runtime_error("decay did not complete");
    hi *= 2.0;
    n = model.propagate(r.pumped, hi, false);
  }
  double lo = excited_and_triplet(r.pumped) < opt.decay_threshold ? 0.0 : hi / 2.0;
  if (lo == 0.0 && excited_and_triplet(r.pumped) < opt.decay_threshold) hi = 0.0;
  while (hi - lo > 1.0) {
    const double mid = 0.5 * (lo + hi);
    const Vector m = model.propagate(r.pumped, mid, false);
    if (excited_and_triplet(m) < opt.decay_threshold * m.sum())
      hi = mid;
    else
      lo = mid;
  }
  r.decay_time = hi;
  r.relaxed = model.propagate(r.pumped, hi, false);
  r.n_up = r.relaxed(ground_up);
  r.n_down = r.relaxed(ground_down);
  r.polarization = ground_polarization(r.relaxed);
  return r;
}

// Integrated fluorescence under pumping from a pure nuclear ground state.
inline double readout(const OnpModel& model, int twice_mi, double horizon) {
  if (twice_mi != 1 && twice_mi != -1) throw std::invalid_argument("nuclear state must be +1/2 or -1/2");
  if (!(horizon > 0.0)) throw std::invalid_argument("readout horizon must be > 0");
  return model.propagate_integrating(ground_state(twice_mi == 1 ? 1.0 : -1.0), horizon, true).second;
}

// (F_+1/2 - F_-1/2) / mean. Negative when |G,+1/2> is the darker state.
inline double readout_contrast(double f_up, double f_down) { return (f_up - f_down) / (0.5 * (f_up + f_down)); }

// Time after which the L1 distance to the pumped steady state stays below
// `fraction` of its initial value, for the slower of the two nuclear ground states.
inline double settling_time(const OnpModel& model, double fraction = 0.1) {
  const Vector ss = model.steady_state();
  auto worst = [&](double t) {
    double w = 0.0;
    for (double pol : {1.0, -1.0}) {
      const Vector n0 = ground_state(pol);
      const double d0 = (n0 - ss).lpNorm<1>();
      w = std::max(w, (model.propagate(n0, t, true) - ss).lpNorm<1>() / d0);
    }
    return w;
  };
  double hi = 100.0;
  while (worst(hi) > fraction) {
    if (hi > 1e9) throw std::runtime_error("no settling within 1 s");
    hi *= 2.0;
  }
  double lo = 0.0;
  while (hi - lo > 1.0) {
    const double mid = 0.5 * (lo + hi);
    (worst(mid) > fraction ? lo : hi) = mid;
  }
  return hi;
}

struct OnpOptions {
  PolarizeOptions polarize;
  double readout_horizon = 20000.0;  // ns
  double settling_fraction = 0.1;
};

struct OnpResult {
  Vector steady;
  double n_up = 0.0;
  double n_down = 0.0;
  double polarization = 0.0;
  double fluorescence_up = 0.0;
  double fluorescence_down = 0.0;
  double contrast = 0.0;
  double signal_contrast = 0.0;
  double settling_time = 0.0;  // ns
};

inline OnpResult evaluate(const OnpModel& model, const OnpOptions& opt = {}) {
  OnpResult r;
  r.steady = model.steady_state();
  const auto pol = polarize(model, opt.polarize);
  r.n_up = pol.n_up;
  r.n_down = pol.n_down;
  r.polarization = pol.polarization;
  r.fluorescence_up = readout(model, 1, opt.readout_horizon);
  r.fluorescence_down = readout(model, -1, opt.readout_horizon);
  r.contrast = readout_contrast(r.fluorescence_up, r.fluorescence_down);
  r.signal_contrast = r.polarization * r.contrast;
  r.settling_time = settling_time(model, opt.settling_fraction);
  return r;
}

// Product of nuclear polarization and readout contrast. Negative when the
// polarized nuclear state is the dark one.
inline double signal_contrast(const OnpModel& model, const OnpOptions& opt = {}) {
  const double p = polarize(model, opt.polarize).polarization;
  const double c = readout_contrast(readout(model, 1, opt.readout_horizon), readout(model, -1, opt.readout_horizon));
  return p * c;
}

struct Segment {
  double duration = 0.0;  // ns
  bool pump_on = true;
};

struct TransientTrace {
  std::vector<double> times;
  std::vector<Vector> populations;
  std::vector<double> cycle_polarization;  // ground polarization at the end of each dark segment
};

// Population traces over an alternating pump/dark schedule, sampled every
// `sample_step` ns and at each segment boundary.
inline TransientTrace transient(const OnpModel& model, std::span<const Segment> schedule, double sample_step,
                                Vector initial = ground_state()) {
  if (schedule.empty()) throw std::invalid_argument("empty pulse schedule");
  if (!(sample_step > 0.0)) throw std::invalid_argument("sample step must be > 0");
  for (const auto& s : schedule)
    if (!(s.duration > 0.0) || !std::isfinite(s.duration)) throw std::invalid_argument("segment durations must be > 0");
  TransientTrace tr;
  double t = 0.0;
  Vector n = std::move(initial);
  tr.times.push_back(t);
  tr.populations.push_back(n);
  for (const auto& seg : schedule) {
    const auto steps = static_cast<long>(std::floor(seg.duration / sample_step + 1e-9));
    const Generator step = expm(model.generator(seg.pump_on) * sample_step);
    double used = 0.0;
    for (long i = 0; i < steps; ++i) {
      n = step * n;
      used += sample_step;
      tr.times.push_back(t + used);
      tr.populations.push_back(n);
    }
    if (seg.duration - used > 1e-9) {
      n = model.propagate(n, seg.duration - used, seg.pump_on);
      tr.times.push_back(t + seg.duration);
      tr.populations.push_back(n);
    }
    t += seg.duration;
    if (!seg.pump_on) tr.cycle_polarization.push_back(ground_polarization(n));
  }
  return tr;
}

// Alternating pump/dark schedule.
inline std::vector<Segment> pulse_train(int cycles, double pump_duration, double dark_duration) {
  std::vector<Segment> s;
  for (int i = 0; i < cycles; ++i) {
    s.push_back({pump_duration, true});
    s.push_back({dark_duration, false});
  }
  return s;
}

}  // namespace st1::onp
