#pragma once

// Five-level optical-cycle rate model: singlet ground G, singlet excited E and
// the three zero-field triplet sublevels |+>, |->, |0>.
//
// All times are in ns and all rates in 1/ns. Population vectors are ordered
// (G, E, |+>, |->, |0>). The reduced linear system eliminates n_G through
// population conservation, leaving x = (n_E, n_+, n_-, n_0) with dx/dt = A x + b.

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "st1/expm.hpp"

namespace st1::rate {

enum class Level { ground = 0, excited = 1, plus = 2, minus = 3, zero = 4 };
enum class Triplet { plus = 0, minus = 1, zero = 2 };

inline constexpr std::size_t kLevels = 5;

inline constexpr Level level_of(Triplet t) { return static_cast<Level>(static_cast<int>(t) + 2); }

inline std::string to_string(Triplet t) {
  switch (t) {
    case Triplet::plus: return "+";
    case Triplet::minus: return "-";
    case Triplet::zero: return "0";
  }
  return "?";
}

// Microwave pi-pulse resonant with one of the three zero-field transitions.
// With D, E > 0 the levels order as |0> < |-> < |+>, so D+E couples |0>,|+>,
// D-E couples |0>,|-> and 2E couples |+>,|->.
enum class PiPulse { none, d_plus_e, d_minus_e, two_e };

inline std::optional<std::pair<Triplet, Triplet>> swapped_levels(PiPulse p) {
  switch (p) {
    case PiPulse::none: return std::nullopt;
    case PiPulse::d_plus_e: return std::pair{Triplet::plus, Triplet::zero};
    case PiPulse::d_minus_e: return std::pair{Triplet::minus, Triplet::zero};
    case PiPulse::two_e: return std::pair{Triplet::plus, Triplet::minus};
  }
  return std::nullopt;
}

// Image of a triplet level under the population exchange of a pulse.
inline Triplet swap_image(PiPulse p, Triplet t) {
  auto s = swapped_levels(p);
  if (!s) return t;
  if (t == s->first) return s->second;
  if (t == s->second) return s->first;
  return t;
}

inline std::string to_string(PiPulse p) {
  switch (p) {
    case PiPulse::none: return "none";
    case PiPulse::d_plus_e: return "D+E";
    case PiPulse::d_minus_e: return "D-E";
    case PiPulse::two_e: return "2E";
  }
  return "?";
}

inline PiPulse pi_pulse_from_string(const std::string& s) {
  if (s == "none") return PiPulse::none;
  if (s == "D+E") return PiPulse::d_plus_e;
  if (s == "D-E") return PiPulse::d_minus_e;
  if (s == "2E") return PiPulse::two_e;
  throw std::invalid_argument("unknown pi-pulse '" + s + "' (expected none, D+E, D-E or 2E)");
}

struct RateParams {
  double pump = 0.0;                         // gamma_GE
  double radiative = 0.0;                    // gamma_EG
  std::array<double, 3> population{};        // gamma_E|i>, indexed by Triplet
  std::array<double, 3> decay{};             // gamma_|i>G, indexed by Triplet

  void validate() const {
    auto bad = [](double r) { return !std::isfinite(r) || r < 0.0; };
    if (bad(pump)) throw std::invalid_argument("pump rate must be finite and >= 0");
    if (!std::isfinite(radiative) || radiative <= 0.0)
      throw std::invalid_argument("radiative rate must be finite and > 0");
    for (double r : population)
      if (bad(r)) throw std::invalid_argument("triplet population rates must be finite and >= 0");
    for (double r : decay)
      if (bad(r)) throw std::invalid_argument("triplet decay rates must be finite and >= 0");
  }

  double population_rate(Triplet t) const { return population[static_cast<int>(t)]; }
  double decay_rate(Triplet t) const { return decay[static_cast<int>(t)]; }

  // gamma_ET, the total intersystem-crossing rate out of E.
  double total_population_rate() const { return population[0] + population[1] + population[2]; }

  // Gamma = gamma_EG + gamma_ET, the total decay rate of E.
  double excited_decay_rate() const { return radiative + total_population_rate(); }

  // Reciprocal of the summed outgoing rates; infinite for a level with none.
  double lifetime(Level l) const {
    double out = 0.0;
    switch (l) {
      case Level::ground: out = pump; break;
      case Level::excited: out = excited_decay_rate(); break;
      default: out = decay[static_cast<int>(l) - 2]; break;
    }
    return out > 0.0 ? 1.0 / out : std::numeric_limits<double>::infinity();
  }

  RateParams with_pump(double p) const {
    RateParams r = *this;
    r.pump = p;
    return r;
  }

  // Equal population rates gamma_ET/3 into each sublevel.
  static RateParams from_lifetimes(double pump_time, double radiative_time,
                                   double population_time, std::array<double, 3> triplet_lifetimes) {
    RateParams r;
    r.pump = pump_time > 0.0 && std::isfinite(pump_time) ? 1.0 / pump_time : 0.0;
    r.radiative = 1.0 / radiative_time;
    r.population.fill(1.0 / population_time);
    for (int i = 0; i < 3; ++i) r.decay[i] = 1.0 / triplet_lifetimes[i];
    return r;
  }
};

// Parameter set of the ground-state recovery simulations: gamma_EG = gamma_GE
// = (10 ns)^-1, gamma_E|i> = (170 ns)^-1, triplet lifetimes 200/1000/2500 ns.
inline RateParams reference_recovery_params() {
  return RateParams::from_lifetimes(10.0, 10.0, 170.0, {200.0, 1000.0, 2500.0});
}

class Populations {
 public:
  using Vector = Eigen::Matrix<double, 5, 1>;

  Populations() : n_(Vector::Zero()) { n_(0) = 1.0; }
  explicit Populations(const Vector& n) : n_(n) {}
  Populations(double g, double e, double p, double m, double z) { n_ << g, e, p, m, z; }

  static Populations all_in(Level l) {
    Vector v = Vector::Zero();
    v(static_cast<int>(l)) = 1.0;
    return Populations(v);
  }

  double operator[](Level l) const { return n_(static_cast<int>(l)); }
  double ground() const { return n_(0); }
  double excited() const { return n_(1); }
  double triplet(Triplet t) const { return n_(static_cast<int>(t) + 2); }
  const Vector& vector() const { return n_; }
  double total() const { return n_.sum(); }

  // Reduced coordinates (n_E, n_+, n_-, n_0).
  Eigen::Vector4d reduced() const { return n_.tail<4>(); }

  static Populations from_reduced(const Eigen::Vector4d& x) {
    Vector v;
    v(0) = 1.0 - x.sum();
    v.tail<4>() = x;
    for (int i = 0; i < 5; ++i)
      if (v(i) < 0.0 && v(i) >= -1e-12) v(i) = 0.0;
    return Populations(v);
  }

  Populations with_swap(PiPulse p) const {
    auto s = swapped_levels(p);
    if (!s) return *this;
    Vector v = n_;
    std::swap(v(static_cast<int>(s->first) + 2), v(static_cast<int>(s->second) + 2));
    return Populations(v);
  }

 private:
  Vector n_;
};

struct RateMatrix {
  Eigen::Matrix4d a;
  Eigen::Vector4d b;

  // Full five-component derivative with dn_G/dt re-inserted from conservation.
  Populations::Vector derivative(const Populations& p) const {
    const Eigen::Vector4d dx = a * p.reduced() + b;
    Populations::Vector d;
    d(0) = -dx.sum();
    d.tail<4>() = dx;
    return d;
  }
};

inline RateMatrix build_rate_matrix(const RateParams& p) {
  p.validate();
  const double big_gamma = p.excited_decay_rate();
  RateMatrix m;
  m.a.setZero();
  // dn_E/dt = pump (1 - n_E - n_+ - n_- - n_0) - Gamma n_E
  m.a.row(0).setConstant(-p.pump);
  m.a(0, 0) = -p.pump - big_gamma;
  for (int i = 0; i < 3; ++i) {
    m.a(i + 1, 0) = p.population[i];
    m.a(i + 1, i + 1) = -p.decay[i];
  }
  m.b << p.pump, 0.0, 0.0, 0.0;
  return m;
}

// Propagator over a fixed step. The reduced affine system is embedded as the
// 5x5 augmented generator [[A, b], [0, 0]], which evaluates
// e^{At} x0 + A^{-1}(e^{At} - 1) b without inverting A, so pump-off and
// otherwise singular A need no special casing. A sixth row accumulates the
// time integral of n_E.
class Propagator {
 public:
  Propagator(const RateParams& p, double t) {
    if (!(t >= 0.0) || !std::isfinite(t)) throw std::invalid_argument("propagation time must be finite and >= 0");
    const RateMatrix m = build_rate_matrix(p);
    Eigen::MatrixXd aug = Eigen::MatrixXd::Zero(6, 6);
    aug.topLeftCorner<4, 4>() = m.a;
    aug.block<4, 1>(0, 4) = m.b;
    aug(5, 0) = 1.0;
    step_ = expm(aug * t);
  }

  Populations advance(const Populations& n) const { return advance_integrating(n).first; }

  // Populations after the step and the integral of n_E over it.
  std::pair<Populations, double> advance_integrating(const Populations& n) const {
    Eigen::Matrix<double, 6, 1> z;
    z.head<4>() = n.reduced();
    z(4) = 1.0;
    z(5) = 0.0;
    const Eigen::VectorXd out = step_ * z;
    return {Populations::from_reduced(out.head<4>()), out(5)};
  }

 private:
  Eigen::MatrixXd step_;
};

inline Populations propagate(const RateParams& p, const Populations& initial, double t) {
  if (t == 0.0) {
    p.validate();
    return initial;
  }
  return Propagator(p, t).advance(initial);
}

// Integral of n_E(t) over [0, t] starting from `initial`.
inline double integrate_excited(const RateParams& p, const Populations& initial, double t) {
  return Propagator(p, t).advance_integrating(initial).second;
}

inline Populations steady_state(const RateParams& p) {
  p.validate();
  if (p.pump == 0.0) return Populations::all_in(Level::ground);
  const RateMatrix m = build_rate_matrix(p);
  Eigen::FullPivLU<Eigen::Matrix4d> lu(m.a);
  if (!lu.isInvertible())
    throw std::domain_error("no unique steady state: more than one absorbing level");
  return Populations::from_reduced(lu.solve(-m.b));
}

struct CurvePoint {
  double x = 0.0;
  double y = 0.0;
};
using Curve = std::vector<CurvePoint>;

inline void require_sorted_nonnegative(std::span<const double> grid, const char* what) {
  for (std::size_t i = 0; i < grid.size(); ++i) {
    if (!(grid[i] >= 0.0) || !std::isfinite(grid[i]))
      throw std::invalid_argument(std::string(what) + ": values must be finite and >= 0");
    if (i > 0 && grid[i] < grid[i - 1]) throw std::invalid_argument(std::string(what) + ": grid must be sorted");
  }
}

// Photon autocorrelation: after a detection the emitter is in G, so
// g2(tau) = n_E(tau | all in G) / n_E(steady state).
inline Curve g2_curve(const RateParams& p, std::span<const double> tau_grid) {
  p.validate();
  if (p.pump <= 0.0) throw std::invalid_argument("g2 is undefined without optical pumping");
  require_sorted_nonnegative(tau_grid, "g2 tau grid");
  const double ne_ss = steady_state(p).excited();
  const Populations start = Populations::all_in(Level::ground);
  Curve out;
  out.reserve(tau_grid.size());
  for (double tau : tau_grid) out.push_back({tau, propagate(p, start, tau).excited() / ne_ss});
  return out;
}

// One term amplitude * t^power * exp(-rate t) of the ground-state recovery.
struct RecoveryTerm {
  std::optional<Triplet> level;  // empty for the fast Gamma term
  double amplitude = 0.0;
  double rate = 0.0;
  int power = 0;
};

// Closed-form n_G(t) in the dark (pump off) from arbitrary initial populations:
//   n_E(t) = n_E0 e^{-Gamma t}
//   n_i(t) = n_i0 e^{-g_i t} + g_Ei n_E0 (e^{-g_i t} - e^{-Gamma t}) / (Gamma - g_i)
//   n_G(t) = 1 - n_E(t) - sum_i n_i(t)
// When the initial state is the pumped steady state this is the four-exponential
// expansion C1 n_G0 e^{-Gamma t} - sum_i Gamma/(Gamma - g_i) n_i0 e^{-g_i t} + C0 n_G0.
struct RecoverySolution {
  double constant = 1.0;
  std::vector<RecoveryTerm> terms;
  double big_gamma = 0.0;
  double initial_ground = 0.0;
  double c1 = 0.0;  // Gamma-term amplitude / n_G(0)
  double c0 = 0.0;  // constant / n_G(0)

  double evaluate(double t) const {
    double v = constant;
    for (const auto& term : terms) v += term.amplitude * std::pow(t, term.power) * std::exp(-term.rate * t);
    return v;
  }

  // Amplitude of the exponential attached to a triplet level, sign flipped so
  // that a recovering (rising) component is positive.
  double level_amplitude(Triplet t) const {
    double a = 0.0;
    for (const auto& term : terms)
      if (term.level == t && term.power == 0) a -= term.amplitude;
    return a;
  }
};

// Rates closer than this are treated as degenerate and use the t e^{-Gamma t} limit.
inline constexpr double kDegenerateRateTolerance = 1e-9;

inline RecoverySolution recovery_solution(const RateParams& p, const Populations& initial) {
  p.validate();
  const double big_gamma = p.excited_decay_rate();
  const double ne0 = initial.excited();
  RecoverySolution s;
  s.big_gamma = big_gamma;
  s.initial_ground = initial.ground();
  double gamma_term = -ne0;
  for (int i = 0; i < 3; ++i) {
    const auto t = static_cast<Triplet>(i);
    const double gi = p.decay[i];
    const double gei = p.population[i];
    const double ni0 = initial.triplet(t);
    if (std::abs(big_gamma - gi) < kDegenerateRateTolerance) {
      s.terms.push_back({t, -ni0, gi, 0});
      s.terms.push_back({t, -gei * ne0, big_gamma, 1});
    } else {
      const double k = gei * ne0 / (big_gamma - gi);
      s.terms.push_back({t, -(ni0 + k), gi, 0});
      gamma_term += k;
    }
  }
  s.terms.insert(s.terms.begin(), RecoveryTerm{std::nullopt, gamma_term, big_gamma, 0});
  s.constant = 1.0;
  if (s.initial_ground > 0.0) {
    s.c1 = gamma_term / s.initial_ground;
    s.c0 = 1.0 / s.initial_ground;
  }
  return s;
}

// Recovery after pumping to steady state and an ideal instantaneous pi-pulse.
inline RecoverySolution recovery_solution(const RateParams& p, PiPulse pulse = PiPulse::none) {
  const Populations initial = steady_state(p).with_swap(pulse);
  return recovery_solution(p.with_pump(0.0), initial);
}

inline double analytic_recovery(const RateParams& p, double dark_time, PiPulse pulse = PiPulse::none) {
  if (!(dark_time >= 0.0)) throw std::invalid_argument("dark time must be >= 0");
  return recovery_solution(p, pulse).evaluate(dark_time);
}

// Triplet amplitudes normalized to the amplitude of `reference`.
inline std::array<double, 3> relative_amplitudes(const RecoverySolution& s, Triplet reference) {
  const double ref = s.level_amplitude(reference);
  if (ref == 0.0) throw std::domain_error("reference amplitude is zero");
  return {s.level_amplitude(Triplet::plus) / ref, s.level_amplitude(Triplet::minus) / ref,
          s.level_amplitude(Triplet::zero) / ref};
}

struct RecoveryOptions {
  double pulse_length = 20000.0;   // ns
  double readout_window = 20.0;    // ns
  PiPulse pulse = PiPulse::none;
};

struct RecoveryCurve {
  std::vector<double> dark_times;
  std::vector<double> signal;      // readout fluorescence normalized to a fully recovered system
  std::vector<double> photons;     // gamma_EG * integral of n_E over the window
  double full_photons = 0.0;
  std::vector<std::string> warnings;
};

// Numeric pulse-sequence simulation: pump from G for pulse_length, optional
// pi-pulse, dark evolution, then integrate the fluorescence gamma_EG n_E over
// the readout window of a second identical pulse.
inline RecoveryCurve simulate_recovery(const RateParams& p, std::span<const double> dark_times,
                                       const RecoveryOptions& opt = {}) {
  p.validate();
  if (dark_times.empty()) throw std::invalid_argument("dark_times must not be empty");
  require_sorted_nonnegative(dark_times, "dark times");
  if (!(opt.readout_window > 0.0)) throw std::invalid_argument("readout window must be > 0");
  if (p.pump <= 0.0) throw std::invalid_argument("recovery simulation requires optical pumping");

  RecoveryCurve out;
  double longest = 0.0;
  for (int i = 0; i < 3; ++i)
    if (p.decay[i] > 0.0) longest = std::max(longest, 1.0 / p.decay[i]);
  if (opt.pulse_length < 5.0 * longest)
    out.warnings.push_back("pump pulse shorter than 5 triplet lifetimes; initial state is not steady");
  if (opt.readout_window > 200.0)
    out.warnings.push_back("readout window longer than 200 ns; readout repolarization distorts the signal");

  const Populations pumped =
      propagate(p, Populations::all_in(Level::ground), opt.pulse_length).with_swap(opt.pulse);
  const RateParams dark = p.with_pump(0.0);
  const Propagator readout(p, opt.readout_window);
  out.full_photons = p.radiative * readout.advance_integrating(Populations::all_in(Level::ground)).second;

  for (double t : dark_times) {
    const Populations n = propagate(dark, pumped, t);
    const double ph = p.radiative * readout.advance_integrating(n).second;
    out.dark_times.push_back(t);
    out.photons.push_back(ph);
    out.signal.push_back(ph / out.full_photons);
  }
  return out;
}

struct PulseResponseOptions {
  double pulse_length = 10000.0;  // ns
  double window = 50.0;           // ns
  double step = 5.0;              // ns, offset spacing; must divide the window
};

// Sliding-window integral W(s) = int_s^{s+w} gamma_EG n_E(t) dt of the
// fluorescence response to a pump pulse starting from G.
inline Curve pulse_response_profile(const RateParams& p, const PulseResponseOptions& opt = {}) {
  p.validate();
  if (!(opt.window > 0.0) || !(opt.step > 0.0)) throw std::invalid_argument("window and step must be > 0");
  if (!(opt.window < opt.pulse_length)) throw std::invalid_argument("window must be shorter than the pulse");
  const double ratio = opt.window / opt.step;
  const auto k = static_cast<std::size_t>(std::llround(ratio));
  if (std::abs(ratio - static_cast<double>(k)) > 1e-9 || k == 0)
    throw std::invalid_argument("window must be an integer multiple of the step");

  const auto steps = static_cast<std::size_t>(std::floor(opt.pulse_length / opt.step + 1e-9));
  const Propagator prop(p, opt.step);
  std::vector<double> cumulative(steps + 1, 0.0);
  Populations n = Populations::all_in(Level::ground);
  for (std::size_t i = 1; i <= steps; ++i) {
    auto [next, integral] = prop.advance_integrating(n);
    cumulative[i] = cumulative[i - 1] + p.radiative * integral;
    n = next;
  }
  Curve out;
  for (std::size_t i = 0; i + k <= steps; ++i)
    out.push_back({static_cast<double>(i) * opt.step, cumulative[i + k] - cumulative[i]});
  return out;
}

}  // namespace st1::rate
