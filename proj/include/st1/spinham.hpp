#pragma once

// S = 1 triplet spin-Hamiltonian
//   H = D [Sz^2 - S(S+1)/3] + E (Sx^2 - Sy^2) + g (muB/h) S.B
// in MHz, with B in mT. Basis ordering is |+1>, |0>, |-1> with the standard
// spin-1 matrices; eigenvector components refer to that ordering.

#include <algorithm>
#include <array>
#include <cmath>
#include <complex>
#include <span>
#include <stdexcept>
#include <tuple>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "st1/constants.hpp"

namespace st1::spin {

using cd = std::complex<double>;
using Matrix3c = Eigen::Matrix3cd;

namespace ops {

inline Matrix3c sx() {
  const double s = 1.0 / std::sqrt(2.0);
  Matrix3c m;
  m << 0, s, 0, s, 0, s, 0, s, 0;
  return m;
}

inline Matrix3c sy() {
  const double s = 1.0 / std::sqrt(2.0);
  const cd i(0.0, 1.0);
  Matrix3c m;
  m << 0, -i * s, 0, i * s, 0, -i * s, 0, i * s, 0;
  return m;
}

inline Matrix3c sz() {
  Matrix3c m = Matrix3c::Zero();
  m(0, 0) = 1.0;
  m(2, 2) = -1.0;
  return m;
}

}  // namespace ops

struct TripletParams {
  double d = 0.0;  // MHz, magnitude
  double e = 0.0;  // MHz, magnitude
  double g = 2.0;
  Eigen::Vector3d field_mt = Eigen::Vector3d::Zero();

  // Sign convention D >= E >= 0; the isotropic g must be physically plausible.
  void validate() const {
    if (!std::isfinite(d) || !std::isfinite(e) || !std::isfinite(g) || !field_mt.allFinite())
      throw std::invalid_argument("triplet parameters must be finite");
    if (e < 0.0 || d < e) throw std::invalid_argument("zero-field splitting must satisfy D >= E >= 0");
    if (g < 1.5 || g > 2.5) throw std::invalid_argument("g-factor outside [1.5, 2.5]");
  }
};

inline Matrix3c zfs_hamiltonian(double d, double e) {
  using namespace ops;
  const Matrix3c z = sz(), x = sx(), y = sy();
  return d * (z * z - (2.0 / 3.0) * Matrix3c::Identity()) + e * (x * x - y * y);
}

inline Matrix3c zeeman(double g, const Eigen::Vector3d& field_mt) {
  if (!field_mt.allFinite()) throw std::invalid_argument("magnetic field must be finite");
  using namespace ops;
  const double k = g * constants::bohr_mhz_per_mt;
  return k * (field_mt.x() * sx() + field_mt.y() * sy() + field_mt.z() * sz());
}

inline Matrix3c triplet_hamiltonian(const TripletParams& p) {
  return zfs_hamiltonian(p.d, p.e) + zeeman(p.g, p.field_mt);
}

// Field magnitude in mT from an energy-unit field g muB |B| / h in MHz.
inline double field_from_mhz(double b_mhz, double g) { return b_mhz / (g * constants::bohr_mhz_per_mt); }

template <int N>
struct EigenSystem {
  Eigen::Matrix<double, N, 1> values;              // ascending, MHz
  Eigen::Matrix<cd, N, N> vectors;                 // columns
};

template <int N>
EigenSystem<N> diagonalize(const Eigen::Matrix<cd, N, N>& h) {
  Eigen::SelfAdjointEigenSolver<Eigen::Matrix<cd, N, N>> es(h);
  if (es.info() != Eigen::Success) throw std::runtime_error("eigen decomposition failed");
  return {es.eigenvalues(), es.eigenvectors()};
}

struct Transition {
  double frequency = 0.0;  // MHz
  int lower = 0;
  int upper = 0;
};

// Pairwise eigenvalue differences sorted ascending; exact ties keep
// eigenvalue-pair index order.
template <int N>
std::vector<Transition> all_transitions(const Eigen::Matrix<double, N, 1>& values) {
  std::vector<Transition> t;
  for (int i = 0; i < values.size(); ++i)
    for (int j = i + 1; j < values.size(); ++j) t.push_back({values(j) - values(i), i, j});
  std::stable_sort(t.begin(), t.end(),
                   [](const Transition& a, const Transition& b) { return a.frequency < b.frequency; });
  return t;
}

inline std::array<double, 3> transition_frequencies(const TripletParams& p) {
  const auto es = diagonalize<3>(triplet_hamiltonian(p));
  const auto t = all_transitions<3>(es.values);
  return {t[0].frequency, t[1].frequency, t[2].frequency};
}

enum class ScanAxis { theta, phi };

struct ScanRow {
  double angle = 0.0;  // rad
  std::array<double, 3> frequencies{};
};

// theta-scan: B = |B| (sin t, 0, cos t); phi-scan: B = |B| (cos p, sin p, 0).
inline Eigen::Vector3d scan_direction(ScanAxis axis, double angle) {
  if (axis == ScanAxis::theta) return {std::sin(angle), 0.0, std::cos(angle)};
  return {std::cos(angle), std::sin(angle), 0.0};
}

inline std::vector<ScanRow> field_scan(const TripletParams& base, double field_mt, ScanAxis axis,
                                       std::span<const double> angles) {
  std::vector<ScanRow> rows;
  rows.reserve(angles.size());
  for (double a : angles) {
    if (!std::isfinite(a)) throw std::invalid_argument("scan angles must be finite");
    TripletParams p = base;
    p.field_mt = field_mt * scan_direction(axis, a);
    rows.push_back({a, transition_frequencies(p)});
  }
  return rows;
}

struct SpinSeparationEstimate {
  double r12_angstrom = 0.0;
};

// Point-dipole inversion of D = (3/2) g_e^2 muB^2 (mu0/4pi) <1/r^3> / h with
// the angular factor set to one.
inline SpinSeparationEstimate r12_estimate(double d_mhz) {
  using namespace constants;
  if (!(d_mhz > 0.0) || !std::isfinite(d_mhz)) throw std::invalid_argument("D must be finite and > 0");
  const double coupling = 1.5 * g_electron * g_electron * bohr_magneton * bohr_magneton * mu0_over_4pi / planck;
  const double inv_r3 = d_mhz * 1e6 / coupling;  // m^-3
  return {std::cbrt(1.0 / inv_r3) / angstrom};
}

}  // namespace st1::spin
