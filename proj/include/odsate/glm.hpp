#pragma once

#include <Eigen/Dense>
#include <optional>
#include <utility>
#include <vector>

#include "odsate/dataset.hpp"
#include "odsate/link.hpp"
#include "odsate/solver.hpp"

namespace odsate {

// Stacked parameter of the estimating-equation system: sampling ratio s,
// index coefficients beta, and the class-conditional outcome means
// u = (u11, u10, u01, u00) where u_td = E[g_t(X) | Y* = d].
struct GlmTheta {
  double s = 1.0;
  Eigen::VectorXd beta;
  Eigen::Vector4d u = Eigen::Vector4d::Zero();
};

struct FitResult {
  GlmTheta theta;
  double tau_hat = 0.0;
  // Sandwich covariance of sqrt(n)(theta_hat - theta); Cov(theta_hat) = v_hat/n.
  Eigen::MatrixXd v_hat;
  double tau_se = 0.0;
  std::pair<double, double> tau_ci95{0.0, 0.0};
  SolveDiagnostics diagnostics;
  SandwichInfo sandwich_info;
  double v_star = 0.0;
  // Populated by the additive-model engine only.
  double lambda_selected = std::numeric_limits<double>::quiet_NaN();
  std::vector<double> bic_trace;
};

// Closed-form sampling-ratio estimator s_hat = sum y*(1-v*) / (sum (1-y*) v*),
// the root of S_n(s) = 0. Throws DegenerateSample when all y* are equal.
double estimate_s_hat(const ObservedSample& sample, double v_star);

// n x (D+2) design with rows (1, t_i, x_i).
Eigen::MatrixXd glm_design(const ObservedSample& sample);

// Mean log-likelihood (1/n) sum [y* log mu + (1-y*) log(1-mu)], mu = h(z'beta).
double glm_loglik(const Eigen::VectorXd& beta, const ObservedSample& sample,
                  const AdjustedLink& link);

// Score (1/n) sum z_i (y*_i - mu_i) h'(eta_i) / (mu_i (1 - mu_i)).
Eigen::VectorXd glm_score(const Eigen::VectorXd& beta, const ObservedSample& sample,
                          const AdjustedLink& link);

// d(score)/d(beta') = -(1/n) Z' W Z with the observed-information weights
// w_i = h'^2/V - (y-mu)[h'' V - h'^2 (1-2mu)]/V^2, V = mu(1-mu).
Eigen::MatrixXd glm_score_jacobian(const Eigen::VectorXd& beta, const ObservedSample& sample,
                                   const AdjustedLink& link);

// Class-conditional means (u11, u10, u01, u00) of g1(x) = expit(a0+a1+b'x)
// and g0(x) = expit(a0+b'x) within the y*=1 / y*=0 strata.
Eigen::Vector4d compute_u_hat(const Eigen::VectorXd& beta, const ObservedSample& sample);

// tau = [v* u11 + (1-v*) u10] - [v* u01 + (1-v*) u00].
double tau_from_u(const Eigen::Vector4d& u, double v_star);

// Per-observation stacked psi_i(theta) rows, columns ordered (s, beta, u);
// each block averages to zero at the fitted theta.
Eigen::MatrixXd glm_stacked_psi(const GlmTheta& theta, const ObservedSample& sample,
                                const MismeasureSpec& spec);

// d(mean psi)/d(theta'): block lower-triangular Jacobian of the stacked system.
Eigen::MatrixXd glm_stacked_jacobian(const GlmTheta& theta, const ObservedSample& sample,
                                     const MismeasureSpec& spec);

// Full pipeline: s_hat (or fixed_s, which also drops the s row from the
// stacked inference so the ratio is treated as known), Newton on glm_score,
// u_hat, tau_hat, and the stacked sandwich variance. Throws NonConvergence,
// DegenerateSample, and RangeCollapse when >10% of fitted indices saturate.
FitResult fit_glm_ee(const ObservedSample& sample, const MismeasureSpec& spec,
                     const SolveOptions& opts = {},
                     std::optional<double> fixed_s = std::nullopt);

}  // namespace odsate
