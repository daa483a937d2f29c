#pragma once

// Damped Gauss-Newton (Levenberg-Marquardt) minimization of |r(x)|^2 with a
// central-difference Jacobian.

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <string>

#include <Eigen/Dense>

namespace st1::fit {

struct LmOptions {
  int max_iterations = 200;
  double ftol = 1e-10;      // relative chi^2 change
  double xtol = 1e-12;      // relative step length
  double fd_step = 1e-6;    // relative finite-difference step
  double lambda0 = 1e-3;
  double lambda_max = 1e14;
};

struct LmResult {
  Eigen::VectorXd x;
  Eigen::VectorXd residuals;
  Eigen::MatrixXd jacobian;
  double chi2 = 0.0;
  int iterations = 0;
  bool converged = false;
  std::string message;
};

using ResidualFunction = std::function<Eigen::VectorXd(const Eigen::VectorXd&)>;

inline Eigen::MatrixXd numeric_jacobian(const ResidualFunction& f, const Eigen::VectorXd& x, double rel_step,
                                        const Eigen::VectorXd* f0 = nullptr) {
  const Eigen::VectorXd base = f0 ? *f0 : f(x);
  Eigen::MatrixXd j(base.size(), x.size());
  Eigen::VectorXd xp = x;
  for (Eigen::Index k = 0; k < x.size(); ++k) {
    const double h = rel_step * std::max(std::abs(x(k)), 1.0);
    xp(k) = x(k) + h;
    const Eigen::VectorXd up = f(xp);
    xp(k) = x(k) - h;
    const Eigen::VectorXd down = f(xp);
    xp(k) = x(k);
    j.col(k) = (up - down) / (2.0 * h);
  }
  return j;
}

inline LmResult levenberg_marquardt(const ResidualFunction& f, Eigen::VectorXd x, const LmOptions& opt = {}) {
  LmResult res;
  Eigen::VectorXd r = f(x);
  if (!r.allFinite()) {
    res.x = x;
    res.residuals = r;
    res.chi2 = std::numeric_limits<double>::infinity();
    res.message = "non-finite residuals at the starting point";
    return res;
  }
  double chi2 = r.squaredNorm();
  double lambda = opt.lambda0;
  Eigen::MatrixXd j = numeric_jacobian(f, x, opt.fd_step, &r);

  int it = 0;
  for (; it < opt.max_iterations; ++it) {
    if (chi2 == 0.0) {
      res.converged = true;
      res.message = "exact fit";
      break;
    }
    const Eigen::MatrixXd jtj = j.transpose() * j;
    const Eigen::VectorXd g = j.transpose() * r;
    Eigen::VectorXd diag = jtj.diagonal();
    for (Eigen::Index k = 0; k < diag.size(); ++k) diag(k) = std::max(diag(k), 1e-12 * (1.0 + jtj.diagonal().maxCoeff()));

    bool accepted = false;
    while (lambda <= opt.lambda_max) {
      Eigen::MatrixXd m = jtj;
      m.diagonal() += lambda * diag;
      const Eigen::VectorXd step = m.ldlt().solve(-g);
      const Eigen::VectorXd xn = x + step;
      const Eigen::VectorXd rn = f(xn);
      const double chi2n = rn.allFinite() ? rn.squaredNorm() : std::numeric_limits<double>::infinity();
      if (step.allFinite() && chi2n <= chi2) {
        const double rel_change = (chi2 - chi2n) / std::max(chi2, std::numeric_limits<double>::min());
        const double rel_step = step.norm() / (x.norm() + opt.xtol);
        x = xn;
        r = rn;
        chi2 = chi2n;
        lambda = std::max(lambda / 10.0, 1e-12);
        accepted = true;
        if (rel_change < opt.ftol || rel_step < opt.xtol) {
          res.converged = true;
          res.message = rel_change < opt.ftol ? "relative chi2 change below tolerance" : "step below tolerance";
        }
        break;
      }
      lambda *= 10.0;
    }
    if (!accepted) {
      // No descent direction improves chi^2 at any damping: stationary to working precision.
      res.converged = true;
      res.message = "no further decrease possible";
      break;
    }
    j = numeric_jacobian(f, x, opt.fd_step, &r);
    if (res.converged) {
      ++it;
      break;
    }
  }
  if (!res.converged) res.message = "maximum iterations reached";
  res.x = x;
  res.residuals = r;
  res.jacobian = j;
  res.chi2 = chi2;
  res.iterations = it;
  return res;
}

struct Covariance {
  Eigen::MatrixXd matrix;
  int rank = 0;
  bool rank_deficient = false;
};

// (J^T J)^+ scaled by chi^2 / nu.
inline Covariance scaled_covariance(const Eigen::MatrixXd& j, double chi2, int nu) {
  Covariance c;
  Eigen::CompleteOrthogonalDecomposition<Eigen::MatrixXd> cod(j.transpose() * j);
  cod.setThreshold(1e-12);
  c.rank = static_cast<int>(cod.rank());
  c.rank_deficient = c.rank < j.cols();
  const double scale = nu > 0 ? chi2 / nu : 1.0;
  c.matrix = cod.pseudoInverse() * scale;
  return c;
}

}  // namespace st1::fit
