#pragma once

// Electro-nuclear Hamiltonian of the triplet coupled to one I = 1/2 nucleus:
//   H = H_triplet (x) 1 + A_xx Sx Ix + A_yy Sy Iy + A_zz Sz Iz  [- g_n muN/h B.I]
// The nuclear principal frame is taken coincident with the defect frame.
// Product basis index = 2 * electron index + nuclear index, with electron
// order |+1>, |0>, |-1> and nuclear order |+1/2>, |-1/2>.

#include <algorithm>
#include <array>
#include <cmath>
#include <numeric>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "st1/constants.hpp"
#include "st1/spinham.hpp"

namespace st1::hf {

using spin::cd;
using Matrix6c = Eigen::Matrix<cd, 6, 6>;
using Vector6d = Eigen::Matrix<double, 6, 1>;
using Matrix2c = Eigen::Matrix2cd;

namespace ops {

inline Matrix2c ix() {
  Matrix2c m;
  m << 0, 0.5, 0.5, 0;
  return m;
}
inline Matrix2c iy() {
  const cd i(0.0, 0.5);
  Matrix2c m;
  m << 0, -i, i, 0;
  return m;
}
inline Matrix2c iz() {
  Matrix2c m;
  m << 0.5, 0, 0, -0.5;
  return m;
}

template <typename A, typename B>
Matrix6c kron(const A& a, const B& b) {
  Matrix6c out;
  for (int i = 0; i < 3; ++i)
    for (int j = 0; j < 3; ++j) out.block<2, 2>(2 * i, 2 * j) = a(i, j) * b;
  return out;
}

}  // namespace ops

// Index of |m_s, m_I> in the product basis; m_s in {+1, 0, -1}, m_I = +1/2 or -1/2
// passed as twice its value (+1 / -1).
inline int basis_index(int ms, int twice_mi) {
  if (ms < -1 || ms > 1 || (twice_mi != 1 && twice_mi != -1)) throw std::invalid_argument("bad spin projection");
  return 2 * (1 - ms) + (twice_mi == 1 ? 0 : 1);
}

struct HyperfineParams {
  spin::TripletParams triplet;
  double a_xx = 0.0;  // MHz
  double a_yy = 0.0;
  double a_zz = 0.0;
  bool nuclear_zeeman = false;
  double g_n = constants::g_carbon13;

  bool is_axial() const { return std::abs(a_xx - a_yy) < 1e-6; }

  double a_perp() const {
    if (!is_axial()) throw std::domain_error("A_perp is undefined when A_xx != A_yy");
    return 0.5 * (a_xx + a_yy);
  }

  static HyperfineParams axial(const spin::TripletParams& t, double a_zz, double a_perp) {
    HyperfineParams p;
    p.triplet = t;
    p.a_xx = p.a_yy = a_perp;
    p.a_zz = a_zz;
    return p;
  }
};

// D = 1134.7, E = 139, A_zz = -117, A_perp = -94 MHz, g = 2.
inline HyperfineParams reference_hyperfine_params() {
  spin::TripletParams t;
  t.d = 1134.7;
  t.e = 139.0;
  t.g = 2.0;
  return HyperfineParams::axial(t, -117.0, -94.0);
}

inline Matrix6c electronuclear_hamiltonian(const HyperfineParams& p) {
  using namespace ops;
  using spin::ops::sx;
  using spin::ops::sy;
  using spin::ops::sz;
  const Matrix2c id2 = Matrix2c::Identity();
  Matrix6c h = kron(spin::triplet_hamiltonian(p.triplet), id2);
  h += p.a_xx * kron(sx(), ix()) + p.a_yy * kron(sy(), iy()) + p.a_zz * kron(sz(), iz());
  if (p.nuclear_zeeman) {
    const Eigen::Vector3d& b = p.triplet.field_mt;
    const Matrix2c nz = b.x() * ix() + b.y() * iy() + b.z() * iz();
    h -= p.g_n * constants::nuclear_mhz_per_mt * kron(spin::Matrix3c::Identity(), nz);
  }
  return h;
}

struct FrequencyWindow {
  double low = 0.0;
  double high = 1e300;
};

struct Resonance {
  double frequency = 0.0;  // MHz
  double intensity = 0.0;  // |<i|Sx (x) 1|j>|^2
  int lower = 0;
  int upper = 0;
};

inline constexpr double kDefaultIntensityThreshold = 1e-4;

inline std::vector<Resonance> resonances_of(const spin::EigenSystem<6>& es, FrequencyWindow window,
                                            double threshold = kDefaultIntensityThreshold) {
  const Matrix6c drive = ops::kron(spin::ops::sx(), Matrix2c::Identity());
  const Matrix6c m = es.vectors.adjoint() * drive * es.vectors;
  std::vector<Resonance> out;
  for (int i = 0; i < 6; ++i)
    for (int j = i + 1; j < 6; ++j) {
      const double f = es.values(j) - es.values(i);
      const double w = std::norm(m(i, j));
      if (w >= threshold && f >= window.low && f <= window.high) out.push_back({f, w, i, j});
    }
  std::stable_sort(out.begin(), out.end(),
                   [](const Resonance& a, const Resonance& b) { return a.frequency < b.frequency; });
  return out;
}

inline std::vector<Resonance> hyperfine_resonances(const HyperfineParams& p, FrequencyWindow window = {},
                                                   double threshold = kDefaultIntensityThreshold) {
  if (!(window.high > window.low)) throw std::invalid_argument("frequency window is empty");
  return resonances_of(spin::diagonalize<6>(electronuclear_hamiltonian(p)), window, threshold);
}

struct LacMap {
  std::vector<double> fields_mt;
  std::vector<Vector6d> branches;  // energies of continuously tracked states, MHz
  std::vector<std::array<int, 6>> order;  // eigenvalue index of each branch per field
  std::vector<double> min_overlap;        // smallest tracked overlap into each field (1 at the first)
  std::vector<std::vector<Resonance>> resonances;
};

inline constexpr double kTrackingOverlapFloor = 0.5;

// Energy levels versus B_z (field along the defect z axis, other components from
// `p.triplet.field_mt` ignored). Branches are continued by maximal eigenvector
// overlap; a step whose best overlap falls below 0.5 falls back to sorted order.
inline LacMap lac_map(const HyperfineParams& p, std::span<const double> fields_mt, FrequencyWindow window = {},
                      double threshold = kDefaultIntensityThreshold) {
  for (std::size_t i = 1; i < fields_mt.size(); ++i)
    if (!(fields_mt[i] > fields_mt[i - 1])) throw std::invalid_argument("field grid must be strictly increasing");
  LacMap map;
  Matrix6c prev_vectors;
  std::array<int, 6> prev_order{};
  for (std::size_t k = 0; k < fields_mt.size(); ++k) {
    HyperfineParams q = p;
    q.triplet.field_mt = Eigen::Vector3d(0.0, 0.0, fields_mt[k]);
    const auto es = spin::diagonalize<6>(electronuclear_hamiltonian(q));
    std::array<int, 6> order{};
    std::iota(order.begin(), order.end(), 0);
    double worst = 1.0;
    if (k > 0) {
      // overlap[b][j] between tracked branch b and new eigenvector j
      Eigen::Matrix<double, 6, 6> overlap;
      for (int b = 0; b < 6; ++b)
        for (int j = 0; j < 6; ++j)
          overlap(b, j) = std::norm(prev_vectors.col(prev_order[b]).dot(es.vectors.col(j)));
      std::array<bool, 6> used_b{}, used_j{};
      std::array<int, 6> assign{};
      for (int round = 0; round < 6; ++round) {
        double best = -1.0;
        int bb = 0, jj = 0;
        for (int b = 0; b < 6; ++b)
          for (int j = 0; j < 6; ++j)
            if (!used_b[b] && !used_j[j] && overlap(b, j) > best) {
              best = overlap(b, j);
              bb = b;
              jj = j;
            }
        used_b[bb] = used_j[jj] = true;
        assign[bb] = jj;
        worst = std::min(worst, best);
      }
      if (worst >= kTrackingOverlapFloor) order = assign;
    }
    Vector6d e;
    for (int b = 0; b < 6; ++b) e(b) = es.values(order[b]);
    map.fields_mt.push_back(fields_mt[k]);
    map.branches.push_back(e);
    map.order.push_back(order);
    map.min_overlap.push_back(worst);
    map.resonances.push_back(resonances_of(es, window, threshold));
    prev_vectors = es.vectors;
    prev_order = order;
  }
  return map;
}

struct AntiCrossing {
  double field_mt = 0.0;
  double gap_mhz = 0.0;
};

// Energy gap between the two eigenstates carrying most weight in
// span{|a>, |b>} at field B_z.
inline double pair_gap(const HyperfineParams& p, int a, int b, double bz) {
  HyperfineParams q = p;
  q.triplet.field_mt = Eigen::Vector3d(0.0, 0.0, bz);
  const auto es = spin::diagonalize<6>(electronuclear_hamiltonian(q));
  std::array<std::pair<double, int>, 6> w;
  for (int j = 0; j < 6; ++j) w[j] = {std::norm(es.vectors(a, j)) + std::norm(es.vectors(b, j)), j};
  std::sort(w.begin(), w.end());
  return std::abs(es.values(w[5].second) - es.values(w[4].second));
}

// Locates the minimum gap of the avoided crossing between basis states a and b
// on [lo, hi] mT: coarse scan followed by golden-section refinement.
inline AntiCrossing find_anticrossing(const HyperfineParams& p, int a, int b, double lo, double hi) {
  if (!(hi > lo)) throw std::invalid_argument("empty field interval");
  constexpr int coarse = 400;
  double best_b = lo, best_gap = 1e300;
  for (int i = 0; i <= coarse; ++i) {
    const double bz = lo + (hi - lo) * i / coarse;
    const double g = pair_gap(p, a, b, bz);
    if (g < best_gap) {
      best_gap = g;
      best_b = bz;
    }
  }
  const double h = (hi - lo) / coarse;
  double x0 = std::max(lo, best_b - h), x3 = std::min(hi, best_b + h);
  const double r = (std::sqrt(5.0) - 1.0) / 2.0;
  double x1 = x3 - r * (x3 - x0), x2 = x0 + r * (x3 - x0);
  double f1 = pair_gap(p, a, b, x1), f2 = pair_gap(p, a, b, x2);
  while (x3 - x0 > 1e-9) {
    if (f1 < f2) {
      x3 = x2;
      x2 = x1;
      f2 = f1;
      x1 = x3 - r * (x3 - x0);
      f1 = pair_gap(p, a, b, x1);
    } else {
      x0 = x1;
      x1 = x2;
      f1 = f2;
      x2 = x0 + r * (x3 - x0);
      f2 = pair_gap(p, a, b, x2);
    }
  }
  const double xm = 0.5 * (x0 + x3);
  return {xm, pair_gap(p, a, b, xm)};
}

struct MixingCoefficients {
  double alpha = 1.0;          // weight of |-1,+1/2> in |I>
  double beta = 0.0;           // weight of |0,-1/2> in |I>
  double relative_sign = 1.0;  // sign of the |0,-1/2> component relative to |-1,+1/2>
  double energy_i = 0.0;       // upper mixed state |I>, MHz
  double energy_ii = 0.0;      // lower mixed state |II>, MHz
};

// Two-level LAC model on span{|-1,+1/2>, |0,-1/2>} with E neglected and an
// axial tensor (isotropic when A_zz = A_perp). |I> is the upper state, which is
// |-1,+1/2> below the crossing and |0,-1/2> above it. alpha and beta are
// reported as magnitudes; only |alpha|^2, |beta|^2 enter the rate model.
inline MixingCoefficients mixing_coefficients(const HyperfineParams& p, double bz_mt) {
  const double a_perp = p.a_perp();
  const double d = p.triplet.d;
  const double ge = p.triplet.g * constants::bohr_mhz_per_mt * bz_mt;
  double h11 = d / 3.0 - ge - 0.5 * p.a_zz;  // |-1,+1/2>
  double h22 = -2.0 * d / 3.0;               // |0,-1/2>
  if (p.nuclear_zeeman) {
    const double gn = p.g_n * constants::nuclear_mhz_per_mt * bz_mt;
    h11 -= 0.5 * gn;
    h22 += 0.5 * gn;
  }
  const double v = a_perp / std::sqrt(2.0);
  const double mean = 0.5 * (h11 + h22);
  const double half = 0.5 * (h11 - h22);
  const double r = std::hypot(half, v);
  MixingCoefficients m;
  m.energy_i = mean + r;
  m.energy_ii = mean - r;
  if (r == 0.0) return m;
  // Upper eigenvector (cos t, sin t) with tan 2t = v / half.
  const double theta = 0.5 * std::atan2(v, half);
  const double c = std::cos(theta), s = std::sin(theta);
  m.alpha = std::abs(c);
  m.beta = std::abs(s);
  m.relative_sign = (c * s >= 0.0) ? 1.0 : -1.0;
  return m;
}

// Field where the diagonal energies of the two-level LAC model cross.
inline double mixing_center_field(const HyperfineParams& p) {
  double slope = p.triplet.g * constants::bohr_mhz_per_mt;
  if (p.nuclear_zeeman) slope += p.g_n * constants::nuclear_mhz_per_mt;
  return (p.triplet.d - 0.5 * p.a_zz) / slope;
}

enum class HyperfineConvention {
  axial,    // A_zz = f + 2d, A_perp = f - d
  printed,  // A_zz = f + d,  A_perp = f - 2d
};

struct FermiDipolar {
  double f = 0.0;  // MHz
  double d = 0.0;  // MHz
};

inline FermiDipolar fermi_dipolar(double a_zz, double a_perp, HyperfineConvention c = HyperfineConvention::axial) {
  if (c == HyperfineConvention::axial) return {(a_zz + 2.0 * a_perp) / 3.0, (a_zz - a_perp) / 3.0};
  return {(2.0 * a_zz + a_perp) / 3.0, (a_zz - a_perp) / 3.0};
}

// Inverse of fermi_dipolar: returns (A_zz, A_perp).
inline std::pair<double, double> axial_components(FermiDipolar fd,
                                                  HyperfineConvention c = HyperfineConvention::axial) {
  if (c == HyperfineConvention::axial) return {fd.f + 2.0 * fd.d, fd.f - fd.d};
  return {fd.f + fd.d, fd.f - 2.0 * fd.d};
}

// Free-atom 2s density at the nucleus and 2p <r^-3>, in atomic units (a0^-3).
struct AtomicConstants {
  std::string name = "carbon-13";
  std::string version = "mp1978";
  double phi_s0_sq = 3.3598;  // |phi_2s(0)|^2
  double r3_p = 2.0009;       // <phi_2p| r^-3 |phi_2p>
  double g_n = constants::g_carbon13;

  void validate() const {
    if (!(phi_s0_sq > 0.0) || !(r3_p > 0.0) || !(g_n > 0.0) || !std::isfinite(phi_s0_sq) || !std::isfinite(r3_p))
      throw std::invalid_argument("atomic constants must be finite and > 0");
  }

  // One-electron couplings for a pure 2s / pure 2p orbital, MHz.
  double isotropic_coupling() const { return 8.0 * constants::pi / 3.0 * prefactor() * phi_s0_sq; }
  double anisotropic_coupling() const { return 0.4 * prefactor() * r3_p; }

 private:
  double prefactor() const {
    using namespace constants;
    const double a3 = bohr_radius * bohr_radius * bohr_radius;
    return mu0_over_4pi * g_electron * bohr_magneton * g_n * nuclear_magneton / planck / a3 / 1e6;
  }
};

struct SpinDensityResult {
  double f = 0.0;
  double d = 0.0;
  double cs2 = 0.0;  // |c_s|^2
  double cp2 = 0.0;  // |c_p|^2
  double eta = 0.0;  // fraction of unpaired spin density on the nucleus' atom
};

// Inverts f = a_s |c_s|^2 eta and d = b_p |c_p|^2 eta with |c_s|^2 + |c_p|^2 = 1.
// f and d must share a sign; the overall sign of the spin density drops out.
inline SpinDensityResult spin_density(double f, double d, const AtomicConstants& atomic = {}) {
  atomic.validate();
  if (!std::isfinite(f) || !std::isfinite(d)) throw std::invalid_argument("f and d must be finite");
  const double xs = f / atomic.isotropic_coupling();
  const double xp = d / atomic.anisotropic_coupling();
  if (xs * xp < 0.0) throw std::domain_error("f and d have opposite signs; no s-p hybrid reproduces them");
  const double total = xs + xp;
  if (total == 0.0) throw std::domain_error("f = d = 0 carries no spin density");
  SpinDensityResult r;
  r.f = f;
  r.d = d;
  r.cs2 = xs / total;
  r.cp2 = xp / total;
  r.eta = std::abs(total);
  if (r.eta > 1.0) throw std::domain_error("implied spin density fraction exceeds one");
  return r;
}

}  // namespace st1::hf
