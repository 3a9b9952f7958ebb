#include "odsate/solver.hpp"

#include <Eigen/LU>
#include <Eigen/SVD>
#include <algorithm>
#include <cmath>
#include <limits>
#include <vector>

namespace odsate {

namespace {

bool all_finite(const Eigen::VectorXd& v) { return v.allFinite(); }

double sup_norm(const Eigen::VectorXd& v) {
  return v.size() == 0 ? 0.0 : v.cwiseAbs().maxCoeff();
}

std::vector<double> to_std(const Eigen::VectorXd& v) {
  return std::vector<double>(v.data(), v.data() + v.size());
}

}  // namespace

Eigen::MatrixXd finite_difference_jacobian(const EquationFn& equation,
                                           const Eigen::VectorXd& theta) {
  const Eigen::Index q = theta.size();
  Eigen::VectorXd probe = equation(theta);
  Eigen::MatrixXd jac(probe.size(), q);
  Eigen::VectorXd lo = theta, hi = theta;
  for (Eigen::Index j = 0; j < q; ++j) {
    const double step = 1e-6 * std::max(1.0, std::abs(theta[j]));
    hi[j] = theta[j] + step;
    lo[j] = theta[j] - step;
    jac.col(j) = (equation(hi) - equation(lo)) / (hi[j] - lo[j]);
    hi[j] = theta[j];
    lo[j] = theta[j];
  }
  return jac;
}

std::pair<Eigen::VectorXd, SolveDiagnostics> newton_solve(const EquationFn& equation,
                                                          const JacobianFn& jacobian,
                                                          const Eigen::VectorXd& init,
                                                          const SolveOptions& opts) {
  Eigen::VectorXd theta = init;
  Eigen::VectorXd score = equation(theta);
  if (!all_finite(score)) {
    throw NonConvergence("equation is non-finite at the starting point", 0,
                         std::numeric_limits<double>::quiet_NaN(), to_std(theta));
  }
  double norm = sup_norm(score);

  SolveDiagnostics diag;
  for (int iter = 0; iter < opts.max_iter; ++iter) {
    if (norm <= opts.tol_score) {
      diag.converged = true;
      diag.iterations = iter;
      diag.final_score_norm = norm;
      return {theta, diag};
    }

    Eigen::MatrixXd jac = opts.jacobian_mode == SolveOptions::JacobianMode::analytic
                              ? jacobian(theta)
                              : finite_difference_jacobian(equation, theta);
    Eigen::FullPivLU<Eigen::MatrixXd> lu(jac);
    if (!lu.isInvertible()) {
      const double max_piv = std::abs(lu.maxPivot());
      double min_piv = max_piv;
      const Eigen::Index r = lu.rank();
      for (Eigen::Index k = 0; k < r; ++k) {
        min_piv = std::min(min_piv, std::abs(lu.matrixLU()(k, k)));
      }
      const double cond = (r < jac.rows() || min_piv == 0.0)
                              ? std::numeric_limits<double>::infinity()
                              : max_piv / min_piv;
      throw SingularJacobian("Newton step: jacobian is numerically singular", cond);
    }
    Eigen::VectorXd full_step = lu.solve(score);

    // Step-halving: shrink until the equation norm stops increasing (or the
    // halving budget runs out, in which case the best finite candidate wins).
    double scale = 1.0;
    Eigen::VectorXd cand;
    Eigen::VectorXd cand_score;
    double cand_norm = std::numeric_limits<double>::infinity();
    int halvings = 0;
    for (;; ++halvings) {
      cand = theta - scale * full_step;
      cand_score = equation(cand);
      const bool finite = all_finite(cand_score) && all_finite(cand);
      cand_norm = finite ? sup_norm(cand_score) : std::numeric_limits<double>::infinity();
      if (finite && cand_norm <= norm) break;
      if (halvings >= opts.step_halving_max) break;
      scale *= 0.5;
    }
    diag.halvings_used += halvings;
    if (!std::isfinite(cand_norm)) {
      throw NonConvergence("step halving could not restore a finite equation value",
                           iter + 1, norm, to_std(theta));
    }
    theta = cand;
    score = cand_score;
    norm = cand_norm;
  }

  if (norm <= opts.tol_score) {
    diag.converged = true;
    diag.iterations = opts.max_iter;
    diag.final_score_norm = norm;
    return {theta, diag};
  }
  throw NonConvergence("maximum iterations reached", opts.max_iter, norm, to_std(theta));
}

Eigen::MatrixXd sandwich_covariance(const Eigen::MatrixXd& psi_per_row,
                                    const Eigen::MatrixXd& jacobian_mean,
                                    SandwichInfo* info) {
  const Eigen::Index n = psi_per_row.rows();
  const Eigen::Index q = psi_per_row.cols();
  if (jacobian_mean.rows() != q || jacobian_mean.cols() != q) {
    throw DomainError("jacobian shape", "jacobian_mean must be q x q matching psi columns");
  }
  if (n == 0) throw DomainError("sample size", "sandwich_covariance requires at least one row");

  const Eigen::MatrixXd bread_input = jacobian_mean;
  Eigen::MatrixXd h = bread_input;

  auto condition_of = [](const Eigen::MatrixXd& m) {
    Eigen::JacobiSVD<Eigen::MatrixXd> svd(m);
    const double smin = svd.singularValues().minCoeff();
    const double smax = svd.singularValues().maxCoeff();
    return smin <= 0.0 ? std::numeric_limits<double>::infinity() : smax / smin;
  };

  double cond = condition_of(h);
  bool ridged = false;
  if (!std::isfinite(cond) || cond > 1e12) {
    h += 1e-10 * Eigen::MatrixXd::Identity(q, q);
    ridged = true;
    cond = condition_of(h);
    if (!std::isfinite(cond)) {
      throw IllConditioned("sandwich bread matrix is singular even after ridging", cond);
    }
  }
  if (info != nullptr) {
    info->condition_estimate = cond;
    info->ridged = ridged;
  }

  const Eigen::MatrixXd b = psi_per_row.transpose() * psi_per_row / static_cast<double>(n);
  Eigen::FullPivLU<Eigen::MatrixXd> lu(h);
  const Eigen::MatrixXd h_inv = lu.inverse();
  Eigen::MatrixXd v = h_inv * b * h_inv.transpose() / static_cast<double>(n);
  return 0.5 * (v + v.transpose());
}

}  // namespace odsate
