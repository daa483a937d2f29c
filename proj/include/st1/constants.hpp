#pragma once

// Physical constants (CODATA 2018) and the unit conventions used throughout:
// time in ns, rates in 1/ns, energies and frequencies in MHz, fields in mT.

namespace st1::constants {

inline constexpr double pi = 3.14159265358979323846;

inline constexpr double planck = 6.62607015e-34;           // J s
inline constexpr double bohr_magneton = 9.2740100783e-24;  // J/T
inline constexpr double nuclear_magneton = 5.0507837461e-27;  // J/T
inline constexpr double mu0_over_4pi = 1.00000000055e-7;   // T^2 m^3 / J
inline constexpr double g_electron = 2.00231930436256;
inline constexpr double bohr_radius = 5.29177210903e-11;   // m
inline constexpr double angstrom = 1e-10;                  // m

// Bohr magneton over h, MHz per mT.
inline constexpr double bohr_mhz_per_mt = 13.996245;
// Nuclear magneton over h, MHz per mT.
inline constexpr double nuclear_mhz_per_mt = 7.6225932e-3;

// 13C nuclear g-factor.
inline constexpr double g_carbon13 = 1.4048;

}  // namespace st1::constants
