#include <gtest/gtest.h>

#include <cmath>
#include <random>
#include <vector>

#include <unsupported/Eigen/MatrixFunctions>

#include "st1/expm.hpp"
#include "st1/ratemodel.hpp"

using namespace st1;
using namespace st1::rate;

namespace {

// Five-level generator written out rate by rate, independent of build_rate_matrix.
Eigen::Matrix<double, 5, 5> full_generator(const RateParams& p) {
  Eigen::Matrix<double, 5, 5> m = Eigen::Matrix<double, 5, 5>::Zero();
  auto add = [&](int from, int to, double r) {
    m(to, from) += r;
    m(from, from) -= r;
  };
  add(0, 1, p.pump);
  add(1, 0, p.radiative);
  for (int i = 0; i < 3; ++i) {
    add(1, 2 + i, p.population[i]);
    add(2 + i, 0, p.decay[i]);
  }
  return m;
}

Eigen::Matrix<double, 5, 1> rk4(const Eigen::Matrix<double, 5, 5>& m, Eigen::Matrix<double, 5, 1> n, double t,
                                double h) {
  const auto steps = std::max(1L, static_cast<long>(std::llround(t / h)));
  h = t / static_cast<double>(steps);
  for (long i = 0; i < steps; ++i) {
    const auto k1 = m * n;
    const auto k2 = m * (n + 0.5 * h * k1);
    const auto k3 = m * (n + 0.5 * h * k2);
    const auto k4 = m * (n + h * k3);
    n += h / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
  }
  return n;
}

RateParams random_params(std::mt19937_64& rng) {
  std::uniform_real_distribution<double> u(0.0, 1.0);
  auto logu = [&](double lo, double hi) { return lo * std::pow(hi / lo, u(rng)); };
  RateParams p;
  p.pump = logu(0.01, 1.0);
  p.radiative = logu(0.05, 1.0);
  for (int i = 0; i < 3; ++i) {
    p.population[static_cast<std::size_t>(i)] = logu(1e-3, 0.1);
    p.decay[static_cast<std::size_t>(i)] = logu(1e-4, 1e-2);
  }
  return p;
}

}  // namespace

TEST(Expm, AgreesWithEigenMatrixFunctions) {
  std::mt19937_64 rng(11);
  std::normal_distribution<double> g(0.0, 1.0);
  for (int trial = 0; trial < 20; ++trial) {
    const int n = 2 + trial % 6;
    Eigen::MatrixXd a(n, n);
    for (int i = 0; i < n; ++i)
      for (int j = 0; j < n; ++j) a(i, j) = g(rng) * (1.0 + trial);
    const Eigen::MatrixXd ours = expm(a);
    const Eigen::MatrixXd ref = a.exp();
    EXPECT_LT((ours - ref).norm(), 1e-10 * ref.norm()) << "trial " << trial;
  }
}

TEST(Expm, ClosedFormsForSmallMatrices) {
  Eigen::MatrixXd nil(2, 2);
  nil << 0, 3, 0, 0;
  Eigen::MatrixXd expected(2, 2);
  expected << 1, 3, 0, 1;
  EXPECT_LT((expm(nil) - expected).norm(), 1e-15);

  Eigen::MatrixXd rot(2, 2);
  rot << 0, -2.0, 2.0, 0;
  const Eigen::MatrixXd r = expm(rot);
  EXPECT_NEAR(r(0, 0), std::cos(2.0), 1e-14);
  EXPECT_NEAR(r(1, 0), std::sin(2.0), 1e-14);

  EXPECT_THROW(expm(Eigen::MatrixXd::Zero(2, 3)), std::invalid_argument);
}

TEST(RateParams, ValidationRejectsNegativeOrNonFinite) {
  RateParams p = reference_recovery_params();
  EXPECT_NO_THROW(p.validate());
  p.pump = -1.0;
  EXPECT_THROW(p.validate(), std::invalid_argument);
  p = reference_recovery_params();
  p.radiative = 0.0;
  EXPECT_THROW(p.validate(), std::invalid_argument);
  p = reference_recovery_params();
  p.decay[1] = std::nan("");
  EXPECT_THROW(p.validate(), std::invalid_argument);
}

TEST(RateParams, ReferenceLifetimes) {
  const auto p = reference_recovery_params();
  EXPECT_DOUBLE_EQ(p.lifetime(Level::plus), 200.0);
  EXPECT_DOUBLE_EQ(p.lifetime(Level::minus), 1000.0);
  EXPECT_DOUBLE_EQ(p.lifetime(Level::zero), 2500.0);
  EXPECT_NEAR(p.total_population_rate(), 3.0 / 170.0, 1e-15);
  EXPECT_TRUE(std::isinf(p.with_pump(0.0).lifetime(Level::ground)));
}

TEST(RateMatrix, DerivativeConservesPopulation) {
  std::mt19937_64 rng(3);
  for (int t = 0; t < 20; ++t) {
    const auto p = random_params(rng);
    const auto m = build_rate_matrix(p);
    const Populations n(0.3, 0.2, 0.1, 0.15, 0.25);
    EXPECT_NEAR(m.derivative(n).sum(), 0.0, 1e-15);
    EXPECT_LT((m.derivative(n) - full_generator(p) * n.vector()).norm(), 1e-14);
  }
}

TEST(Propagation, MatchesRk4Oracle) {
  std::mt19937_64 rng(5);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (int trial = 0; trial < 10; ++trial) {
    const auto p = random_params(rng);
    Populations::Vector n0;
    for (int i = 0; i < 5; ++i) n0(i) = u(rng);
    n0 /= n0.sum();
    const double t = 2.0 + 18.0 * u(rng);
    const auto ours = propagate(p, Populations(n0), t).vector();
    const auto ref = rk4(full_generator(p), n0, t, 1e-3);
    EXPECT_LT((ours - ref).cwiseAbs().maxCoeff(), 1e-8) << "trial " << trial;
  }
}

TEST(Propagation, ZeroTimeIsIdentityAndTotalIsConserved) {
  const auto p = reference_recovery_params();
  const Populations n(0.5, 0.1, 0.1, 0.1, 0.2);
  EXPECT_EQ(propagate(p, n, 0.0).vector(), n.vector());
  EXPECT_NEAR(propagate(p, n, 12345.0).total(), 1.0, 1e-12);
  EXPECT_THROW(Propagator(p, -1.0), std::invalid_argument);
}

TEST(Propagation, IntegratedExcitedMatchesQuadrature) {
  const auto p = reference_recovery_params();
  const auto start = Populations::all_in(Level::ground);
  const double t = 300.0;
  const int n = 3000;
  double simpson = 0.0;
  for (int i = 0; i <= n; ++i) {
    const double w = (i == 0 || i == n) ? 1.0 : (i % 2 ? 4.0 : 2.0);
    simpson += w * propagate(p, start, t * i / n).excited();
  }
  simpson *= t / n / 3.0;
  EXPECT_NEAR(integrate_excited(p, start, t), simpson, 1e-9 * simpson);
}

TEST(SteadyState, IsStationaryAndLimitOfPropagation) {
  const auto p = reference_recovery_params();
  const auto ss = steady_state(p);
  EXPECT_LT(build_rate_matrix(p).derivative(ss).cwiseAbs().maxCoeff(), 1e-15);
  EXPECT_LT((propagate(p, Populations::all_in(Level::ground), 1e6).vector() - ss.vector()).norm(), 1e-10);
  // Triplet occupation in proportion to lifetimes.
  EXPECT_NEAR(ss.triplet(Triplet::zero) / ss.triplet(Triplet::plus), 12.5, 1e-9);
  const auto dark = steady_state(p.with_pump(0.0));
  EXPECT_DOUBLE_EQ(dark.ground(), 1.0);
}

TEST(SteadyState, SingleTrapAbsorbsEverythingAndTwoTrapsAreSingular) {
  auto p = reference_recovery_params();
  p.decay[2] = 0.0;
  EXPECT_NEAR(steady_state(p).triplet(Triplet::zero), 1.0, 1e-12);
  p.decay[1] = 0.0;
  EXPECT_THROW(steady_state(p), std::domain_error);
}

TEST(PiPulse, SwapsTheNamedSublevels) {
  const Populations n(0.1, 0.0, 0.2, 0.3, 0.4);
  EXPECT_DOUBLE_EQ(n.with_swap(PiPulse::d_plus_e).triplet(Triplet::plus), 0.4);
  EXPECT_DOUBLE_EQ(n.with_swap(PiPulse::d_minus_e).triplet(Triplet::minus), 0.4);
  EXPECT_DOUBLE_EQ(n.with_swap(PiPulse::two_e).triplet(Triplet::plus), 0.3);
  EXPECT_EQ(n.with_swap(PiPulse::none).vector(), n.vector());
  EXPECT_EQ(pi_pulse_from_string("D-E"), PiPulse::d_minus_e);
  EXPECT_THROW(pi_pulse_from_string("3E"), std::invalid_argument);
}

TEST(Recovery, ClosedFormMatchesPropagation) {
  const auto p = reference_recovery_params();
  for (auto pulse : {PiPulse::none, PiPulse::d_plus_e, PiPulse::d_minus_e, PiPulse::two_e}) {
    const auto initial = steady_state(p).with_swap(pulse);
    const auto sol = recovery_solution(p, pulse);
    for (double t : {0.0, 3.0, 50.0, 400.0, 2000.0, 9000.0}) {
      const double numeric = propagate(p.with_pump(0.0), initial, t).ground();
      EXPECT_NEAR(sol.evaluate(t), numeric, 1e-12) << to_string(pulse) << " t=" << t;
    }
    EXPECT_NEAR(sol.evaluate(0.0), initial.ground(), 1e-14);
    EXPECT_NEAR(sol.evaluate(1e7), 1.0, 1e-12);
  }
}

TEST(Recovery, ConstantsRelativeToInitialGround) {
  const auto p = reference_recovery_params();
  const auto sol = recovery_solution(p);
  const double ng0 = steady_state(p).ground();
  EXPECT_NEAR(sol.c0, 1.0 / ng0, 1e-12);
  EXPECT_NEAR(sol.c1 * ng0, sol.terms.front().amplitude, 1e-15);
  // Triplet amplitude is Gamma / (Gamma - gamma_i) n_i0.
  const double big_gamma = p.excited_decay_rate();
  const double n0 = steady_state(p).triplet(Triplet::zero);
  EXPECT_NEAR(sol.level_amplitude(Triplet::zero), big_gamma / (big_gamma - p.decay[2]) * n0, 1e-14);
}

TEST(Recovery, DegenerateRateBranchIsContinuous) {
  auto p = reference_recovery_params();
  const Populations initial(0.2, 0.3, 0.1, 0.2, 0.2);
  const double big_gamma = p.excited_decay_rate();
  p.decay[0] = big_gamma;
  const auto exact = recovery_solution(p, initial);
  p.decay[0] = big_gamma * (1.0 + 1e-6);
  const auto near = recovery_solution(p, initial);
  for (double t : {1.0, 10.0, 100.0}) EXPECT_NEAR(exact.evaluate(t), near.evaluate(t), 1e-6);
  bool has_power = false;
  for (const auto& term : exact.terms) has_power = has_power || term.power == 1;
  EXPECT_TRUE(has_power);
}

TEST(Recovery, NoMicrowaveAmplitudesFollowLifetimes) {
  const auto r = relative_amplitudes(recovery_solution(reference_recovery_params()), Triplet::minus);
  EXPECT_NEAR(r[0], 0.2, 0.2 * 0.05);
  EXPECT_DOUBLE_EQ(r[1], 1.0);
  EXPECT_NEAR(r[2], 2.4, 2.4 * 0.05);
}

TEST(Recovery, NumericSimulationTracksAnalyticCurve) {
  const auto p = reference_recovery_params();
  std::vector<double> dark;
  for (int i = 0; i < 40; ++i) dark.push_back(20.0 * std::pow(600.0, i / 39.0));
  for (auto pulse : {PiPulse::none, PiPulse::d_plus_e}) {
    RecoveryOptions opt;
    opt.pulse = pulse;
    const auto curve = simulate_recovery(p, dark, opt);
    EXPECT_TRUE(curve.warnings.empty());
    const auto sol = recovery_solution(p, pulse);
    double ss = 0.0;
    for (std::size_t i = 0; i < dark.size(); ++i) ss += std::pow(curve.signal[i] - sol.evaluate(dark[i]), 2);
    EXPECT_LT(std::sqrt(ss / dark.size()), 0.02);
    EXPECT_NEAR(curve.signal.back(), 1.0, 0.02);
  }
}

TEST(Recovery, SimulationWarnsAndRejects) {
  const auto p = reference_recovery_params();
  const std::vector<double> dark{10.0, 20.0};
  RecoveryOptions opt;
  opt.pulse_length = 1000.0;
  EXPECT_FALSE(simulate_recovery(p, dark, opt).warnings.empty());
  EXPECT_THROW(simulate_recovery(p.with_pump(0.0), dark), std::invalid_argument);
  const std::vector<double> unsorted{20.0, 10.0};
  EXPECT_THROW(simulate_recovery(p, unsorted), std::invalid_argument);
}

TEST(G2, AntibunchingAndBunching) {
  auto p = reference_recovery_params();
  p.pump = 0.05;
  p.population.fill(1.0 / 168.0);
  std::vector<double> taus;
  for (int i = 0; i <= 400; ++i) taus.push_back(i * 5.0);
  const auto c = g2_curve(p, taus);
  EXPECT_DOUBLE_EQ(c.front().y, 0.0);
  double peak = 0.0;
  for (const auto& pt : c) peak = std::max(peak, pt.y);
  EXPECT_GT(peak, 1.05);
  const std::vector<double> far{1e6};
  EXPECT_NEAR(g2_curve(p, far).front().y, 1.0, 1e-9);
  EXPECT_THROW(g2_curve(p.with_pump(0.0), taus), std::invalid_argument);
}

TEST(PulseResponse, WindowIntegralsAndValidation) {
  auto p = RateParams::from_lifetimes(1.0, 10.0, 85.0, {200.0, 1000.0, 2500.0});
  PulseResponseOptions opt;
  opt.pulse_length = 30000.0;
  const auto c = pulse_response_profile(p, opt);
  ASSERT_FALSE(c.empty());
  EXPECT_DOUBLE_EQ(c.front().x, 0.0);
  EXPECT_NEAR(c[1].x - c[0].x, 5.0, 1e-12);
  // The saturated response decays towards the shelved steady state.
  EXPECT_GT(c[4].y, c.back().y);
  const double ss_rate = p.radiative * steady_state(p).excited();
  EXPECT_NEAR(c.back().y, ss_rate * opt.window, 0.01 * ss_rate * opt.window);
  opt.step = 7.0;
  EXPECT_THROW(pulse_response_profile(p, opt), std::invalid_argument);
}

TEST(Propagation, SemigroupAndNonNegativity) {
  std::mt19937_64 rng(8);
  for (int trial = 0; trial < 10; ++trial) {
    const auto p = random_params(rng);
    const auto start = Populations::all_in(Level::ground);
    const auto once = propagate(p, start, 700.0);
    const auto twice = propagate(p, propagate(p, start, 250.0), 450.0);
    EXPECT_LT((once.vector() - twice.vector()).cwiseAbs().maxCoeff(), 1e-10);
    for (double t : {0.5, 5.0, 50.0, 5000.0}) {
      const auto n = propagate(p, start, t);
      EXPECT_GE(n.vector().minCoeff(), -1e-12);
      EXPECT_NEAR(n.total(), 1.0, 1e-9);
    }
  }
}

TEST(SteadyState, FixedPointForAllTimes) {
  const auto p = reference_recovery_params();
  const auto ss = steady_state(p);
  for (double t : {0.1, 10.0, 1000.0, 1e5}) EXPECT_LT((propagate(p, ss, t).vector() - ss.vector()).norm(), 1e-11);
}

TEST(PiPulse, DoubleSwapIsIdentity) {
  const auto p = reference_recovery_params();
  const auto ss = steady_state(p);
  const auto dark = p.with_pump(0.0);
  for (auto pulse : {PiPulse::d_plus_e, PiPulse::d_minus_e, PiPulse::two_e}) {
    const auto twice = recovery_solution(dark, ss.with_swap(pulse).with_swap(pulse));
    for (double t : {0.0, 100.0, 3000.0}) EXPECT_NEAR(twice.evaluate(t), analytic_recovery(p, t), 1e-12);
  }
}

TEST(Recovery, SwapPermutesTheDominantLevel) {
  // Level carrying the largest amplitude, per pulse.
  const auto p = reference_recovery_params();
  auto dominant = [&](PiPulse pulse) {
    const auto s = recovery_solution(p, pulse);
    int best = 0;
    for (int i = 1; i < 3; ++i)
      if (s.level_amplitude(static_cast<Triplet>(i)) > s.level_amplitude(static_cast<Triplet>(best))) best = i;
    return static_cast<Triplet>(best);
  };
  EXPECT_EQ(dominant(PiPulse::none), Triplet::zero);
  EXPECT_EQ(dominant(PiPulse::d_plus_e), Triplet::plus);
  EXPECT_EQ(dominant(PiPulse::d_minus_e), Triplet::minus);
  EXPECT_EQ(dominant(PiPulse::two_e), Triplet::zero);
}
