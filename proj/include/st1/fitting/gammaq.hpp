#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

namespace st1::fit {

namespace detail {

// Lower regularized P(a, x) by its power series; converges quickly for x < a + 1.
inline double gamma_p_series(double a, double x) {
  double term = 1.0 / a;
  double sum = term;
  for (int n = 1; n < 1000000; ++n) {
    term *= x / (a + n);
    sum += term;
    if (std::abs(term) < std::abs(sum) * 1e-16) break;
  }
  return sum * std::exp(-x + a * std::log(x) - std::lgamma(a));
}

// Upper regularized Q(a, x) by the modified Lentz continued fraction, x >= a + 1.
inline double gamma_q_fraction(double a, double x) {
  constexpr double tiny = 1e-300;
  double b = x + 1.0 - a;
  double c = 1.0 / tiny;
  double d = 1.0 / b;
  double h = d;
  for (int i = 1; i < 1000000; ++i) {
    const double an = -i * (i - a);
    b += 2.0;
    d = an * d + b;
    if (std::abs(d) < tiny) d = tiny;
    c = b + an / c;
    if (std::abs(c) < tiny) c = tiny;
    d = 1.0 / d;
    const double delta = d * c;
    h *= delta;
    if (std::abs(delta - 1.0) < 1e-16) break;
  }
  return std::exp(-x + a * std::log(x) - std::lgamma(a)) * h;
}

}  // namespace detail

// Regularized upper incomplete gamma function Q(a, x).
inline double gamma_q(double a, double x) {
  if (!(a > 0.0) || !std::isfinite(a)) throw std::invalid_argument("gamma_q: a must be finite and > 0");
  if (std::isnan(x) || x < 0.0) throw std::invalid_argument("gamma_q: x must be >= 0");
  if (x == 0.0) return 1.0;
  if (std::isinf(x)) return 0.0;
  if (x < a + 1.0) return 1.0 - detail::gamma_p_series(a, x);
  return detail::gamma_q_fraction(a, x);
}

// Probability that chi^2 with nu degrees of freedom exceeds chi2 by chance.
inline double goodness_of_fit(double chi2, int nu) {
  if (nu < 1) throw std::invalid_argument("goodness_of_fit: degrees of freedom must be >= 1");
  if (std::isnan(chi2) || chi2 < 0.0) throw std::invalid_argument("goodness_of_fit: chi2 must be >= 0");
  const double q = gamma_q(0.5 * nu, 0.5 * chi2);
  return std::clamp(q, 0.0, 1.0);
}

}  // namespace st1::fit
