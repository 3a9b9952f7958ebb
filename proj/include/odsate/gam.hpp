#pragma once

#include <Eigen/Dense>
#include <optional>
#include <utility>
#include <vector>

#include "odsate/dataset.hpp"
#include "odsate/glm.hpp"
#include "odsate/link.hpp"
#include "odsate/solver.hpp"

namespace odsate {

struct SplineConfig {
  int degree_p = 3;
  int knots_Kn = 10;
  int penalty_order_m = 2;
  std::vector<double> lambda_grid = default_lambda_grid();
  double gamma = 0.1;
  // Optional per-covariate override forcing a linear (unpenalized) column;
  // empty means "splines for continuous covariates, linear for discrete".
  std::vector<bool> per_covariate_linear;

  // 15 log-spaced values on [0.1, 100].
  static std::vector<double> default_lambda_grid();
  void validate() const;
};

// Assembled additive-model design: column layout is
// [smooth blocks | centered linear columns | intercept | treatment].
struct GamDesign {
  Eigen::MatrixXd z;
  Eigen::MatrixXd q_a;           // difference penalty, lambda-weighted, spline blocks only
  Eigen::MatrixXd t_a;           // gamma ridge, spline blocks only
  Eigen::MatrixXd penalty_unit;  // q_a at lambda = 1 (shared), for regridding
  std::vector<Eigen::VectorXd> knot_vectors;
  std::vector<std::pair<Eigen::Index, Eigen::Index>> smooth_blocks;  // (start, size)
  std::vector<int> smooth_covariates;
  std::vector<Eigen::Index> linear_cols;
  std::vector<int> linear_covariates;
  Eigen::Index intercept_col = -1;
  Eigen::Index treatment_col = -1;
  std::vector<std::pair<double, double>> rescale;  // (min, max) per smooth covariate
  Eigen::VectorXd centering;                       // subtracted column means

  Eigen::Index q() const { return z.cols(); }
};

// Builds the B-spline design (continuous covariates min-max rescaled to [0,1],
// equidistant clamped knots, column-centered blocks, explicit intercept) and
// the penalty matrices. `lambdas` holds one shared value or one per smooth.
// Throws DomainError on constant covariates or dimension overflow.
GamDesign build_gam_design(const ObservedSample& sample, const SplineConfig& config,
                           const std::vector<double>& lambdas);

// Penalized score (1/n) Z'U - (1/n)(Q_a + T_a) beta at sampling ratio s
// (the rates are taken from `link`, the ratio from `s`).
Eigen::VectorXd penalized_score(const Eigen::VectorXd& beta, double s, const GamDesign& design,
                                const Eigen::VectorXd& y_star, const AdjustedLink& link);

// Ridge-corrected penalized mean log-likelihood, the antiderivative of
// penalized_score: loglik - beta'(Q_a + T_a) beta / (2n).
double penalized_loglik(const Eigen::VectorXd& beta, double s, const GamDesign& design,
                        const Eigen::VectorXd& y_star, const AdjustedLink& link);

// BIC(lambda) = -2 n loglik_bar + log(n) edf over config.lambda_grid with
// edf = tr[(Z'WZ + Q_a(lambda) + T_a)^-1 Z'WZ]; returns the minimizer (ties
// toward smaller lambda) and the BIC per grid point in grid order
// (+inf for grid points whose fit failed). Throws AllGridFailed.
std::pair<double, std::vector<double>> select_lambda_bic(
    const ObservedSample& sample, const MismeasureSpec& spec, const SplineConfig& config,
    const SolveOptions& opts = {}, std::optional<double> fixed_s = std::nullopt);

// Additive-model analogue of fit_glm_ee: selects lambda (via BIC when the
// grid has several entries), Newton-solves the penalized score, and runs the
// stacked sandwich with the difference penalty in H and unpenalized psi rows.
FitResult fit_gam_ee(const ObservedSample& sample, const MismeasureSpec& spec,
                     const SplineConfig& config, const SolveOptions& opts = {},
                     std::optional<double> fixed_s = std::nullopt);

}  // namespace odsate
