#pragma once

#include <Eigen/Dense>
#include <functional>
#include <utility>

#include "odsate/errors.hpp"

namespace odsate {

struct SolveOptions {
  double tol_score = 1e-8;     // sup-norm tolerance on the equation vector
  int max_iter = 100;
  int step_halving_max = 30;
  enum class JacobianMode { analytic, finite_difference };
  JacobianMode jacobian_mode = JacobianMode::analytic;
};

struct SolveDiagnostics {
  bool converged = false;
  int iterations = 0;
  double final_score_norm = 0.0;
  int halvings_used = 0;
};

using EquationFn = std::function<Eigen::VectorXd(const Eigen::VectorXd&)>;
using JacobianFn = std::function<Eigen::MatrixXd(const Eigen::VectorXd&)>;

// Damped Newton on equation(theta) = 0. A full step is halved whenever it
// increases the equation sup-norm or produces non-finite values. Throws
// NonConvergence (with last iterate and norm) when max_iter is exhausted and
// SingularJacobian when the linear solve fails.
std::pair<Eigen::VectorXd, SolveDiagnostics> newton_solve(const EquationFn& equation,
                                                          const JacobianFn& jacobian,
                                                          const Eigen::VectorXd& init,
                                                          const SolveOptions& opts = {});

// Central-difference Jacobian of `equation`; used by
// SolveOptions::JacobianMode::finite_difference and by tests.
Eigen::MatrixXd finite_difference_jacobian(const EquationFn& equation,
                                           const Eigen::VectorXd& theta);

struct SandwichInfo {
  double condition_estimate = 0.0;
  bool ridged = false;  // true when jacobian_mean was perturbed by 1e-10*I
};

// M-estimation covariance of theta_hat: (1/n) * H^-1 B H^-T with
// H = jacobian_mean (the caller supplies H_hat = -(1/n) sum dpsi_i/dtheta')
// and B = (1/n) sum psi_i psi_i'. Output is symmetrized. If H is singular or
// its condition estimate exceeds 1e12, H is perturbed by 1e-10*I and the
// event is reported through `info`.
Eigen::MatrixXd sandwich_covariance(const Eigen::MatrixXd& psi_per_row,
                                    const Eigen::MatrixXd& jacobian_mean,
                                    SandwichInfo* info = nullptr);

}  // namespace odsate
