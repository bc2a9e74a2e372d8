#pragma once

#include <cmath>
#include <functional>
#include <limits>

#include <Eigen/Dense>

namespace atomsense {

struct LeastSquaresResult {
  Eigen::VectorXd params;
  Eigen::MatrixXd covariance;  // scaled by the residual variance
  double chi2 = 0.0;
  int iterations = 0;
  bool converged = false;
};

// Residual function: fills r (size m) for parameters p.
using ResidualFn = std::function<void(const Eigen::VectorXd& p, Eigen::VectorXd& r)>;

/// Levenberg-Marquardt with a forward-difference Jacobian. Small dense
/// problems only (a handful of parameters, a few hundred residuals).
inline LeastSquaresResult levenberg_marquardt(const ResidualFn& fn, Eigen::VectorXd p,
                                              Eigen::Index m, int max_iter = 200,
                                              double tol = 1e-15) {
  const Eigen::Index n = p.size();
  Eigen::VectorXd r(m), r_trial(m), r_step(m);
  Eigen::MatrixXd jac(m, n);
  fn(p, r);
  double cost = r.squaredNorm();
  double lambda = 1e-3;
  LeastSquaresResult out;

  auto jacobian = [&](const Eigen::VectorXd& at, const Eigen::VectorXd& r0) {
    for (Eigen::Index j = 0; j < n; ++j) {
      const double h = 1e-7 * std::max(std::abs(at[j]), 1e-3);
      Eigen::VectorXd q = at;
      q[j] += h;
      fn(q, r_step);
      jac.col(j) = (r_step - r0) / h;
    }
  };

  for (int it = 0; it < max_iter; ++it) {
    out.iterations = it + 1;
    jacobian(p, r);
    const Eigen::MatrixXd jtj = jac.transpose() * jac;
    const Eigen::VectorXd jtr = jac.transpose() * r;
    bool improved = false;
    for (int attempt = 0; attempt < 30; ++attempt) {
      Eigen::MatrixXd a = jtj;
      a.diagonal() += lambda * jtj.diagonal().cwiseMax(1e-30);
      const Eigen::VectorXd step = a.ldlt().solve(-jtr);
      const Eigen::VectorXd trial = p + step;
      fn(trial, r_trial);
      const double trial_cost = r_trial.squaredNorm();
      if (std::isfinite(trial_cost) && trial_cost <= cost) {
        const double rel = (cost - trial_cost) / std::max(cost, 1e-300);
        const double step_rel = step.norm() / std::max(p.norm(), 1e-300);
        p = trial;
        r = r_trial;
        cost = trial_cost;
        lambda = std::max(lambda * 0.3, 1e-12);
        improved = true;
        if (rel < tol || step_rel < 1e-14 || cost == 0.0) out.converged = true;
        break;
      }
      lambda *= 10.0;
    }
    if (!improved) {
      out.converged = true;  // no descent direction left
      break;
    }
    if (out.converged) break;
  }

  jacobian(p, r);
  const Eigen::MatrixXd jtj = jac.transpose() * jac;
  const double dof = static_cast<double>(std::max<Eigen::Index>(m - n, 1));
  out.params = p;
  out.chi2 = cost;
  out.covariance = jtj.ldlt().solve(Eigen::MatrixXd::Identity(n, n)) * (cost / dof);
  return out;
}

}  // namespace atomsense
