#pragma once

// Shared assembly of the stacked estimating-equation system (s, beta, u) used
// by both the parametric and the additive-model engines. Internal header.

#include <Eigen/Dense>

#include "odsate/glm.hpp"
#include "odsate/link.hpp"

namespace odsate::detail {

inline constexpr double kMuEps = 1e-10;  // clamp for mu(1-mu) and logs
inline constexpr double kCollapseFraction = 0.10;
inline constexpr double kZ95 = 1.96;

// View of one engine's design: Z is the beta-block regressor matrix whose
// `treatment_col` column holds the raw treatment indicator.
struct StackedSystem {
  const Eigen::MatrixXd& z;
  Eigen::Index treatment_col;
  const Eigen::VectorXd& y;
  double v_star;
  double p01;
  double p10;
};

// Per-row psi(theta), columns (s | beta | u); the s column is omitted when
// include_s is false (ratio treated as known).
Eigen::MatrixXd stacked_psi(const StackedSystem& sys, double s, const Eigen::VectorXd& beta,
                            const Eigen::Vector4d& u, bool include_s);

// d(mean psi)/d(theta'). `beta_penalty_mean`, when non-null, is added as
// -(1/n)*P to the beta-beta block (the additive engine's H uses the
// difference penalty there while the psi rows stay unpenalized).
Eigen::MatrixXd stacked_jacobian(const StackedSystem& sys, double s, const Eigen::VectorXd& beta,
                                 const Eigen::Vector4d& u, bool include_s,
                                 const Eigen::MatrixXd* beta_penalty_mean);

// Gradient of tau = q' theta in the stacked parameter order.
Eigen::VectorXd tau_gradient(double v_star, Eigen::Index n_beta, bool include_s);

// Mean log-likelihood, score, and observed-information Jacobian of the
// beta block on an arbitrary design.
double design_loglik(const Eigen::MatrixXd& z, const Eigen::VectorXd& y,
                     const Eigen::VectorXd& beta, const AdjustedLink& link);
Eigen::VectorXd design_score(const Eigen::MatrixXd& z, const Eigen::VectorXd& y,
                             const Eigen::VectorXd& beta, const AdjustedLink& link);
Eigen::MatrixXd design_score_jacobian(const Eigen::MatrixXd& z, const Eigen::VectorXd& y,
                                      const Eigen::VectorXd& beta, const AdjustedLink& link);
// Nonnegative IRLS-style weights h'^2 / V used for effective-df traces.
Eigen::VectorXd design_fisher_weights(const Eigen::MatrixXd& z, const Eigen::VectorXd& beta,
                                      const AdjustedLink& link);

// Class-conditional g-means on an arbitrary design.
Eigen::Vector4d design_u_hat(const Eigen::MatrixXd& z, Eigen::Index treatment_col,
                             const Eigen::VectorXd& y, const Eigen::VectorXd& beta);

// Fraction of rows whose fitted mean hits the probability clamp; throws
// RangeCollapse when it exceeds kCollapseFraction.
void check_range_collapse(const Eigen::MatrixXd& z, const Eigen::VectorXd& beta,
                          const AdjustedLink& link);

// Sandwich inference for tau on a solved system: fills v_hat (n * Cov),
// tau_se, and the Wald interval of `fit`.
void finish_inference(const StackedSystem& sys, FitResult& fit, bool include_s,
                      const Eigen::MatrixXd* beta_penalty_mean);

// Default warm start: the link inverse h^-1 at the clamped outcome mean on
// the intercept coordinate, zero elsewhere. Starting at a matched mean keeps
// Newton inside the informative band of the link; the plain logit can sit
// many units away when s is far from 1.
Eigen::VectorXd warm_start(Eigen::Index n_beta, Eigen::Index intercept_col,
                           const Eigen::VectorXd& y, const AdjustedLink& link);

// Guard against the score-norm trap: far outside the informative band the
// derivative h' underflows, the score vanishes, and a wild Newton step can
// "converge" there. A genuine root reached by damped ascent can never have a
// lower mean log-likelihood than the warm start, so a drop marks a bogus root.
void check_likelihood_progress(const Eigen::MatrixXd& z, const Eigen::VectorXd& y,
                               const Eigen::VectorXd& start, const Eigen::VectorXd& solution,
                               const AdjustedLink& link, const SolveDiagnostics& diag);

}  // namespace odsate::detail
