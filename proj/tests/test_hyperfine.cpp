#include <gtest/gtest.h>

#include <cmath>
#include <numbers>
#include <vector>

#include "st1/hyperfine.hpp"

using namespace st1;
using namespace st1::hf;

namespace {

HyperfineParams at_field(HyperfineParams p, double bz) {
  p.triplet.field_mt = Eigen::Vector3d(0.0, 0.0, bz);
  return p;
}

}  // namespace

TEST(BasisIndex, OrderingAndValidation) {
  EXPECT_EQ(basis_index(1, 1), 0);
  EXPECT_EQ(basis_index(1, -1), 1);
  EXPECT_EQ(basis_index(0, 1), 2);
  EXPECT_EQ(basis_index(-1, -1), 5);
  EXPECT_THROW(basis_index(2, 1), std::invalid_argument);
  EXPECT_THROW(basis_index(0, 0), std::invalid_argument);
}

TEST(ElectronuclearHamiltonian, ZeroCouplingDuplicatesTripletLevels) {
  auto p = reference_hyperfine_params();
  p.a_xx = p.a_yy = p.a_zz = 0.0;
  for (double bz : {0.0, 20.0, 42.0}) {
    const auto q = at_field(p, bz);
    const auto e6 = spin::diagonalize<6>(electronuclear_hamiltonian(q)).values;
    const auto e3 = spin::diagonalize<3>(spin::triplet_hamiltonian(q.triplet)).values;
    for (int k = 0; k < 6; ++k) EXPECT_NEAR(e6(k), e3(k / 2), 1e-9);
  }
}

TEST(ElectronuclearHamiltonian, HermitianAndTraceless) {
  auto p = at_field(reference_hyperfine_params(), 33.0);
  p.nuclear_zeeman = true;
  const auto h = electronuclear_hamiltonian(p);
  EXPECT_LT((h - h.adjoint()).norm(), 1e-12);
  EXPECT_NEAR(std::abs(h.trace()), 0.0, 1e-9);
}

TEST(ElectronuclearHamiltonian, EigenvalueSumEqualsTrace) {
  const auto h = electronuclear_hamiltonian(at_field(reference_hyperfine_params(), 17.0));
  const auto es = spin::diagonalize<6>(h);
  EXPECT_NEAR(es.values.sum(), h.trace().real(), 1e-9);
}

TEST(ElectronuclearHamiltonian, ZeroCouplingLevelsAreExactlyDoubled) {
  auto p = at_field(reference_hyperfine_params(), 12.0);
  p.a_xx = p.a_yy = p.a_zz = 0.0;
  const auto e = spin::diagonalize<6>(electronuclear_hamiltonian(p)).values;
  for (int k = 0; k < 6; k += 2) EXPECT_NEAR(e(k), e(k + 1), 1e-10);
}

TEST(AxialTensor, PerpendicularComponentRequiresAxialSymmetry) {
  auto p = reference_hyperfine_params();
  EXPECT_TRUE(p.is_axial());
  EXPECT_DOUBLE_EQ(p.a_perp(), -94.0);
  p.a_xx = -80.0;
  EXPECT_THROW(p.a_perp(), std::domain_error);
}

TEST(LevelAntiCrossing, LiesNearTheMixingCenter) {
  const auto p = reference_hyperfine_params();
  const auto lac = find_anticrossing(p, basis_index(-1, 1), basis_index(0, -1), 30.0, 55.0);
  EXPECT_NEAR(lac.field_mt, 40.5, 2.0);
  EXPECT_NEAR(mixing_center_field(p), lac.field_mt, 1.0);
}

TEST(LevelAntiCrossing, GapIsRootTwoAPerpWithoutRhombicity) {
  auto p = reference_hyperfine_params();
  p.triplet.e = 0.0;
  const auto lac = find_anticrossing(p, basis_index(-1, 1), basis_index(0, -1), 30.0, 55.0);
  EXPECT_NEAR(lac.gap_mhz, std::sqrt(2.0) * 94.0, 0.02 * std::sqrt(2.0) * 94.0);
  EXPECT_NEAR(lac.field_mt, mixing_center_field(p), 0.5);
}

TEST(Mixing, EqualWeightsAtCenterAndPureFarAway) {
  const auto p = reference_hyperfine_params();
  const double bc = mixing_center_field(p);
  const auto m = mixing_coefficients(p, bc);
  EXPECT_NEAR(m.alpha, 1.0 / std::sqrt(2.0), 1e-12);
  EXPECT_NEAR(m.beta, 1.0 / std::sqrt(2.0), 1e-12);
  EXPECT_NEAR(m.energy_i - m.energy_ii, std::sqrt(2.0) * 94.0, 1e-9);

  const auto below = mixing_coefficients(p, 0.0);
  EXPECT_GT(below.alpha, 0.99);
  const auto above = mixing_coefficients(p, 100.0);
  EXPECT_GT(above.beta, 0.99);
  for (double b : {0.0, 20.0, 41.0, 60.0}) {
    const auto mm = mixing_coefficients(p, b);
    EXPECT_NEAR(mm.alpha * mm.alpha + mm.beta * mm.beta, 1.0, 1e-12);
  }
}

TEST(Mixing, TwoLevelEnergiesTrackTheFullHamiltonian) {
  const auto p = reference_hyperfine_params();
  const double bc = mixing_center_field(p);
  const auto m = mixing_coefficients(p, bc);
  const auto e = spin::diagonalize<6>(electronuclear_hamiltonian(at_field(p, bc))).values;
  const double bound = p.triplet.e + std::abs(p.a_zz - p.a_perp());
  for (double target : {m.energy_i, m.energy_ii}) {
    double nearest = 1e300;
    for (int k = 0; k < 6; ++k) nearest = std::min(nearest, std::abs(e(k) - target));
    EXPECT_LT(nearest, bound);
  }
}

TEST(Mixing, NuclearZeemanShiftsTheCenterSlightly) {
  auto p = reference_hyperfine_params();
  const double plain = mixing_center_field(p);
  p.nuclear_zeeman = true;
  const double shifted = mixing_center_field(p);
  EXPECT_LT(shifted, plain);
  EXPECT_NEAR(shifted, plain, 0.05);
}

TEST(FermiDipolar, ReferenceDecomposition) {
  const auto fd = fermi_dipolar(-117.0, -94.0);
  EXPECT_NEAR(fd.f, -101.67, 0.01);
  EXPECT_NEAR(fd.d, -7.67, 0.01);
}

TEST(FermiDipolar, BothConventionsRoundTrip) {
  for (auto c : {HyperfineConvention::axial, HyperfineConvention::printed}) {
    const auto fd = fermi_dipolar(-117.0, -94.0, c);
    const auto [azz, aperp] = axial_components(fd, c);
    EXPECT_NEAR(azz, -117.0, 1e-12);
    EXPECT_NEAR(aperp, -94.0, 1e-12);
  }
  const auto printed = fermi_dipolar(-117.0, -94.0, HyperfineConvention::printed);
  EXPECT_NEAR(printed.f, -109.33, 0.01);
}

TEST(SpinDensity, CouplingConstantsFromFundamentalConstants) {
  // CODATA 2018 values, written out here rather than taken from the library.
  const double mu0_4pi = 1.00000000055e-7;
  const double ge = 2.00231930436256;
  const double mub = 9.2740100783e-24;
  const double mun = 5.0507837461e-27;
  const double h = 6.62607015e-34;
  const double a0 = 5.29177210903e-11;
  const double gn = 1.40482;
  const double pre = mu0_4pi * ge * mub * gn * mun / h / (a0 * a0 * a0) / 1e6;
  AtomicConstants atomic;
  EXPECT_NEAR(atomic.isotropic_coupling(), 8.0 * std::numbers::pi / 3.0 * pre * 3.3598,
              1e-4 * atomic.isotropic_coupling());
  EXPECT_NEAR(atomic.anisotropic_coupling(), 0.4 * pre * 2.0009, 1e-4 * atomic.anisotropic_coupling());
}

TEST(SpinDensity, ReferenceHybridisation) {
  const auto fd = fermi_dipolar(-117.0, -94.0);
  const auto r = spin_density(fd.f, fd.d);
  EXPECT_NEAR(r.cs2, 0.274, 0.002);
  EXPECT_NEAR(r.cp2, 0.726, 0.002);
  EXPECT_NEAR(r.eta, 0.098, 0.002);
  EXPECT_NEAR(r.cs2 + r.cp2, 1.0, 1e-12);
  const AtomicConstants atomic;
  EXPECT_NEAR(atomic.isotropic_coupling() * r.cs2 * r.eta, std::abs(fd.f), 1e-9);
}

TEST(SpinDensity, RejectsInconsistentInput) {
  EXPECT_THROW(spin_density(-100.0, 7.0), std::domain_error);
  EXPECT_THROW(spin_density(0.0, 0.0), std::domain_error);
  EXPECT_THROW(spin_density(1e6, 1e5), std::domain_error);
  AtomicConstants bad;
  bad.r3_p = -1.0;
  EXPECT_THROW(spin_density(-100.0, -7.0, bad), std::invalid_argument);
}

TEST(Resonances, ZeroFieldLinesWithoutCoupling) {
  auto p = reference_hyperfine_params();
  p.a_xx = p.a_yy = p.a_zz = 0.0;
  const auto lines = hyperfine_resonances(p);
  ASSERT_FALSE(lines.empty());
  const std::vector<double> allowed{2.0 * 139.0, 1134.7 - 139.0, 1134.7 + 139.0};
  for (const auto& r : lines) {
    double nearest = 1e300;
    for (double a : allowed) nearest = std::min(nearest, std::abs(r.frequency - a));
    EXPECT_LT(nearest, 1e-6) << r.frequency;
    EXPECT_GE(r.intensity, kDefaultIntensityThreshold);
  }
  EXPECT_THROW(hyperfine_resonances(p, FrequencyWindow{500.0, 100.0}), std::invalid_argument);
}

TEST(Resonances, WindowFilters) {
  const auto p = at_field(reference_hyperfine_params(), 20.0);
  const FrequencyWindow w{800.0, 1400.0};
  const auto lines = hyperfine_resonances(p, w);
  ASSERT_FALSE(lines.empty());
  for (const auto& r : lines) {
    EXPECT_GE(r.frequency, w.low);
    EXPECT_LE(r.frequency, w.high);
  }
}

TEST(LacMap, TracksBranchesContinuously) {
  const auto p = reference_hyperfine_params();
  std::vector<double> fields;
  for (int i = 0; i <= 200; ++i) fields.push_back(30.0 + 0.1 * i);
  const auto map = lac_map(p, fields, FrequencyWindow{0.0, 2000.0});
  ASSERT_EQ(map.branches.size(), fields.size());
  for (std::size_t k = 1; k < fields.size(); ++k) {
    EXPECT_GE(map.min_overlap[k], 0.9);
    EXPECT_LT((map.branches[k] - map.branches[k - 1]).cwiseAbs().maxCoeff(), 5.0);
  }
  const std::vector<double> bad{1.0, 1.0};
  EXPECT_THROW(lac_map(p, bad), std::invalid_argument);
}
