#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <complex>
#include <numbers>
#include <random>
#include <vector>

#include "st1/spinham.hpp"

using namespace st1;
using namespace st1::spin;

namespace {

constexpr double kD = 1134.7;
constexpr double kE = 139.0;

// Roots of det(lambda - H) for a traceless-shifted Hermitian 3x3 matrix by the
// trigonometric solution of the depressed cubic.
std::array<double, 3> cubic_eigenvalues(const Matrix3c& h) {
  const double q = h.trace().real() / 3.0;
  const Matrix3c b = h - q * Matrix3c::Identity();
  const double p2 = (b * b).trace().real() / 6.0;
  const double p = std::sqrt(p2);
  if (p < 1e-14) return {q, q, q};
  const double r = std::clamp((b / p).determinant().real() / 2.0, -1.0, 1.0);
  const double phi = std::acos(r) / 3.0;
  std::array<double, 3> ev{q + 2.0 * p * std::cos(phi), q + 2.0 * p * std::cos(phi + 2.0 * std::numbers::pi / 3.0),
                           q + 2.0 * p * std::cos(phi + 4.0 * std::numbers::pi / 3.0)};
  std::sort(ev.begin(), ev.end());
  return ev;
}

}  // namespace

TEST(SpinOperators, CommutationAndCasimir) {
  using namespace ops;
  const std::complex<double> i(0.0, 1.0);
  EXPECT_LT((sx() * sy() - sy() * sx() - i * sz()).norm(), 1e-15);
  EXPECT_LT((sy() * sz() - sz() * sy() - i * sx()).norm(), 1e-15);
  EXPECT_LT((sz() * sx() - sx() * sz() - i * sy()).norm(), 1e-15);
  const Matrix3c s2 = sx() * sx() + sy() * sy() + sz() * sz();
  EXPECT_LT((s2 - 2.0 * Matrix3c::Identity()).norm(), 1e-15);
}

TEST(ZeroField, ClosedFormLevelsAndTransitions) {
  const auto es = diagonalize<3>(zfs_hamiltonian(kD, kE));
  EXPECT_NEAR(es.values(0), -2.0 * kD / 3.0, 1e-9);
  EXPECT_NEAR(es.values(1), kD / 3.0 - kE, 1e-9);
  EXPECT_NEAR(es.values(2), kD / 3.0 + kE, 1e-9);
  EXPECT_NEAR(es.values.sum(), 0.0, 1e-9);

  TripletParams p{kD, kE, 2.0, Eigen::Vector3d::Zero()};
  const auto f = transition_frequencies(p);
  EXPECT_NEAR(f[0], 2.0 * kE, 1e-9);
  EXPECT_NEAR(f[1], kD - kE, 1e-9);
  EXPECT_NEAR(f[2], kD + kE, 1e-9);
}

TEST(Zeeman, FieldAlongZHasClosedForm) {
  for (double b : {0.0, 5.0, 40.0, 300.0}) {
    TripletParams p{kD, kE, 2.0, Eigen::Vector3d(0.0, 0.0, b)};
    const auto es = diagonalize<3>(triplet_hamiltonian(p));
    const double w = 2.0 * constants::bohr_mhz_per_mt * b;
    const double split = std::sqrt(kE * kE + w * w);
    std::array<double, 3> expect{-2.0 * kD / 3.0, kD / 3.0 - split, kD / 3.0 + split};
    std::sort(expect.begin(), expect.end());
    for (int k = 0; k < 3; ++k) EXPECT_NEAR(es.values(k), expect[k], 1e-9) << "B=" << b;
  }
}

TEST(Zeeman, ArbitraryFieldsMatchCubicRoots) {
  std::mt19937_64 rng(17);
  std::uniform_real_distribution<double> u(-200.0, 200.0);
  for (int trial = 0; trial < 50; ++trial) {
    TripletParams p{kD, kE, 2.0, Eigen::Vector3d(u(rng), u(rng), u(rng))};
    const auto h = triplet_hamiltonian(p);
    EXPECT_LT((h - h.adjoint()).norm(), 1e-12);
    const auto es = diagonalize<3>(h);
    const auto ref = cubic_eigenvalues(h);
    for (int k = 0; k < 3; ++k) EXPECT_NEAR(es.values(k), ref[static_cast<std::size_t>(k)], 1e-7);
  }
}

TEST(Zeeman, EnergyUnitFieldRoundTrip) {
  const double b_mt = 12.5;
  const double b_mhz = 2.0023 * constants::bohr_mhz_per_mt * b_mt;
  EXPECT_NEAR(field_from_mhz(b_mhz, 2.0023), b_mt, 1e-12);
  EXPECT_THROW(zeeman(2.0, Eigen::Vector3d(std::nan(""), 0.0, 0.0)), std::invalid_argument);
}

TEST(Transitions, SortedPairwiseDifferences) {
  Eigen::Vector4d v(0.0, 1.0, 3.0, 3.0);
  const auto t = all_transitions<4>(v);
  ASSERT_EQ(t.size(), 6u);
  EXPECT_DOUBLE_EQ(t[0].frequency, 0.0);
  EXPECT_EQ(t[0].lower, 2);
  EXPECT_DOUBLE_EQ(t.back().frequency, 3.0);
  for (std::size_t i = 1; i < t.size(); ++i) EXPECT_LE(t[i - 1].frequency, t[i].frequency);
}

TEST(FieldScan, PhiScanAtZeroAngleEqualsFieldAlongX) {
  TripletParams base{kD, kE, 2.0, Eigen::Vector3d::Zero()};
  const std::vector<double> angles{0.0, std::numbers::pi / 2.0};
  const auto rows = field_scan(base, 30.0, ScanAxis::phi, angles);
  TripletParams px = base;
  px.field_mt = Eigen::Vector3d(30.0, 0.0, 0.0);
  const auto fx = transition_frequencies(px);
  for (int k = 0; k < 3; ++k) EXPECT_NEAR(rows[0].frequencies[static_cast<std::size_t>(k)], fx[static_cast<std::size_t>(k)], 1e-9);
  const auto theta = field_scan(base, 30.0, ScanAxis::theta, std::vector<double>{std::numbers::pi / 2.0});
  for (int k = 0; k < 3; ++k)
    EXPECT_NEAR(theta[0].frequencies[static_cast<std::size_t>(k)], fx[static_cast<std::size_t>(k)], 1e-9);
  EXPECT_THROW(field_scan(base, 30.0, ScanAxis::theta, std::vector<double>{INFINITY}), std::invalid_argument);
}

TEST(TripletParams, Validation) {
  TripletParams p{kD, kE, 2.0, Eigen::Vector3d::Zero()};
  EXPECT_NO_THROW(p.validate());
  p.e = kD + 1.0;
  EXPECT_THROW(p.validate(), std::invalid_argument);
  p = {kD, -1.0, 2.0, Eigen::Vector3d::Zero()};
  EXPECT_THROW(p.validate(), std::invalid_argument);
  p = {kD, kE, 3.0, Eigen::Vector3d::Zero()};
  EXPECT_THROW(p.validate(), std::invalid_argument);
}

TEST(SpinSeparation, PointDipoleValuesAndScaling) {
  EXPECT_NEAR(r12_estimate(kD).r12_angstrom, 4.10, 0.02);
  EXPECT_NEAR(r12_estimate(2870.0).r12_angstrom, 3.01, 0.02);
  const double ratio = r12_estimate(kD).r12_angstrom / r12_estimate(8.0 * kD).r12_angstrom;
  EXPECT_NEAR(ratio, 2.0, 1e-12);
  EXPECT_THROW(r12_estimate(0.0), std::invalid_argument);
  EXPECT_THROW(r12_estimate(-5.0), std::invalid_argument);
}

TEST(ZeroField, HamiltonianIsHermitianTracelessAndSumRuleHolds) {
  const auto h = zfs_hamiltonian(kD, kE);
  EXPECT_LT((h - h.adjoint()).norm(), 1e-12);
  EXPECT_LT(std::abs(h.trace()), 1e-12);
  const auto f = transition_frequencies({kD, kE, 2.0, Eigen::Vector3d::Zero()});
  EXPECT_NEAR(f[0] + f[1], f[2], 1e-9);
}

TEST(Zeeman, RhombicSignFlipEqualsQuarterTurnOfTheField) {
  std::mt19937_64 rng(29);
  std::uniform_real_distribution<double> u(-100.0, 100.0);
  for (int trial = 0; trial < 20; ++trial) {
    const Eigen::Vector3d b(u(rng), u(rng), u(rng));
    const Eigen::Vector3d rotated(-b.y(), b.x(), b.z());
    const auto a = spin::diagonalize<3>(Matrix3c(zfs_hamiltonian(kD, kE) + zeeman(2.0, b))).values;
    const auto r = spin::diagonalize<3>(Matrix3c(zfs_hamiltonian(kD, -kE) + zeeman(2.0, rotated))).values;
    EXPECT_LT((a - r).cwiseAbs().maxCoeff(), 1e-9);
  }
}

TEST(Zeeman, TransitionsAreLipschitzInTheField) {
  // Each level moves by at most g muB |dB| (|S| <= 1 per component).
  const double lip = 2.0 * 2.0 * constants::bohr_mhz_per_mt;
  TripletParams p{kD, kE, 2.0, Eigen::Vector3d::Zero()};
  const Eigen::Vector3d dir = Eigen::Vector3d(0.3, -0.5, 0.8).normalized();
  auto prev = transition_frequencies(p);
  const double step = 0.05;
  for (int i = 1; i <= 2000; ++i) {
    p.field_mt = dir * (step * i);
    const auto f = transition_frequencies(p);
    for (int k = 0; k < 3; ++k)
      EXPECT_LE(std::abs(f[static_cast<std::size_t>(k)] - prev[static_cast<std::size_t>(k)]), lip * step + 1e-9);
    prev = f;
  }
}
