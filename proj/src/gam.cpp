#include "odsate/gam.hpp"

#include <Eigen/LU>
#include <algorithm>
#include <cmath>
#include <numeric>

#include "odsate/errors.hpp"
#include "odsate/spline.hpp"
#include "stacked_detail.hpp"

namespace odsate {

std::vector<double> SplineConfig::default_lambda_grid() {
  constexpr int kPoints = 15;
  constexpr double kLo = 0.1, kHi = 100.0;
  std::vector<double> grid(kPoints);
  for (int i = 0; i < kPoints; ++i) {
    grid[i] = kLo * std::pow(kHi / kLo, static_cast<double>(i) / (kPoints - 1));
  }
  return grid;
}

void SplineConfig::validate() const {
  if (degree_p < 1) throw DomainError("degree_p >= 1", "spline degree too small");
  if (knots_Kn < penalty_order_m + 1) {
    throw DomainError("knots_Kn >= penalty_order_m + 1", "too few knots for the penalty order");
  }
  if (penalty_order_m < 1) throw DomainError("penalty_order_m >= 1", "penalty order too small");
  if (gamma < 0.0) throw DomainError("gamma >= 0", "ridge weight must be nonnegative");
  for (double l : lambda_grid) {
    if (!(l >= 0.0) || !std::isfinite(l)) {
      throw DomainError("lambda >= 0", "smoothing weights must be nonnegative reals");
    }
  }
}

GamDesign build_gam_design(const ObservedSample& sample, const SplineConfig& config,
                           const std::vector<double>& lambdas) {
  sample.validate();
  config.validate();
  const Eigen::Index n = sample.n();
  const Eigen::Index d = sample.d();
  if (!config.per_covariate_linear.empty() &&
      static_cast<Eigen::Index>(config.per_covariate_linear.size()) != d) {
    throw DomainError("per_covariate_linear size",
                      "linearity flags must match the covariate count");
  }

  const auto column_label = [&sample](int j) {
    return sample.names.empty() ? "x" + std::to_string(j + 1)
                                : sample.names[static_cast<std::size_t>(j)];
  };

  std::vector<int> smooth_ix, linear_ix;
  for (Eigen::Index j = 0; j < d; ++j) {
    const bool forced_linear =
        !config.per_covariate_linear.empty() && config.per_covariate_linear[j];
    const bool discrete = sample.kinds[j] == CovariateKind::discrete;
    if (forced_linear || discrete) {
      linear_ix.push_back(static_cast<int>(j));
    } else {
      smooth_ix.push_back(static_cast<int>(j));
    }
  }
  if (!lambdas.empty() && lambdas.size() != 1 && lambdas.size() != smooth_ix.size()) {
    throw DomainError("lambdas size", "pass one shared lambda or one per smooth");
  }

  const Eigen::Index basis_per_smooth = config.knots_Kn + config.degree_p;
  const Eigen::Index q = static_cast<Eigen::Index>(smooth_ix.size()) * basis_per_smooth +
                         static_cast<Eigen::Index>(linear_ix.size()) + 2;
  if (q >= n) {
    throw DomainError("beta dimension < n", "spline basis is larger than the sample");
  }

  GamDesign design;
  design.z.resize(n, q);
  design.centering = Eigen::VectorXd::Zero(q);
  Eigen::Index col = 0;

  for (int j : smooth_ix) {
    const Eigen::VectorXd xj = sample.x.col(j);
    const double lo = xj.minCoeff();
    const double hi = xj.maxCoeff();
    if (!(lo < hi)) {
      throw DomainError("non-constant covariate",
                        "covariate '" + column_label(j) + "' is constant");
    }
    const Eigen::VectorXd rescaled = (xj.array() - lo) / (hi - lo);
    const Eigen::VectorXd knots = clamped_knots(0.0, 1.0, config.knots_Kn, config.degree_p);
    Eigen::MatrixXd basis = bspline_design(rescaled, config.degree_p, knots);
    for (Eigen::Index k = 0; k < basis.cols(); ++k) {
      const double mean = basis.col(k).mean();
      design.centering[col + k] = mean;
      design.z.col(col + k) = basis.col(k).array() - mean;
    }
    design.smooth_blocks.emplace_back(col, basis_per_smooth);
    design.smooth_covariates.push_back(j);
    design.knot_vectors.push_back(knots);
    design.rescale.emplace_back(lo, hi);
    col += basis_per_smooth;
  }
  for (int j : linear_ix) {
    const Eigen::VectorXd xj = sample.x.col(j);
    const double mean = xj.mean();
    if (xj.minCoeff() == xj.maxCoeff()) {
      throw DomainError("non-constant covariate",
                        "covariate '" + column_label(j) + "' is constant");
    }
    design.centering[col] = mean;
    design.z.col(col) = xj.array() - mean;
    design.linear_cols.push_back(col);
    design.linear_covariates.push_back(j);
    ++col;
  }
  design.intercept_col = col;
  design.z.col(col).setOnes();
  ++col;
  design.treatment_col = col;
  design.z.col(col) = sample.t;

  design.penalty_unit = Eigen::MatrixXd::Zero(q, q);
  design.t_a = Eigen::MatrixXd::Zero(q, q);
  design.q_a = Eigen::MatrixXd::Zero(q, q);
  for (std::size_t b = 0; b < design.smooth_blocks.size(); ++b) {
    const auto [start, size] = design.smooth_blocks[b];
    const Eigen::MatrixXd delta =
        difference_penalty(config.penalty_order_m, static_cast<int>(size));
    const Eigen::MatrixXd block = delta.transpose() * delta;
    design.penalty_unit.block(start, start, size, size) = block;
    design.t_a.block(start, start, size, size) =
        config.gamma * Eigen::MatrixXd::Identity(size, size);
    const double lambda =
        lambdas.empty() ? 0.0 : (lambdas.size() == 1 ? lambdas[0] : lambdas[b]);
    design.q_a.block(start, start, size, size) = lambda * block;
  }
  return design;
}

Eigen::VectorXd penalized_score(const Eigen::VectorXd& beta, double s, const GamDesign& design,
                                const Eigen::VectorXd& y_star, const AdjustedLink& link) {
  const AdjustedLink at_s(link.p01(), link.p10(), s);
  const double n = static_cast<double>(design.z.rows());
  return detail::design_score(design.z, y_star, beta, at_s) -
         (design.q_a + design.t_a) * beta / n;
}

double penalized_loglik(const Eigen::VectorXd& beta, double s, const GamDesign& design,
                        const Eigen::VectorXd& y_star, const AdjustedLink& link) {
  const AdjustedLink at_s(link.p01(), link.p10(), s);
  const double n = static_cast<double>(design.z.rows());
  const double penalty = beta.dot((design.q_a + design.t_a) * beta) / (2.0 * n);
  return detail::design_loglik(design.z, y_star, beta, at_s) - penalty;
}

namespace {

// Newton solve of the penalized score at a fixed penalty pair (Q, T).
std::pair<Eigen::VectorXd, SolveDiagnostics> solve_penalized(
    const GamDesign& design, const Eigen::MatrixXd& q_a, const Eigen::VectorXd& y,
    const AdjustedLink& link, const Eigen::VectorXd& start, const SolveOptions& opts) {
  const double n = static_cast<double>(design.z.rows());
  const Eigen::MatrixXd penalty = q_a + design.t_a;
  const auto equation = [&](const Eigen::VectorXd& b) -> Eigen::VectorXd {
    return detail::design_score(design.z, y, b, link) - penalty * b / n;
  };
  const auto jacobian = [&](const Eigen::VectorXd& b) -> Eigen::MatrixXd {
    return detail::design_score_jacobian(design.z, y, b, link) - penalty / n;
  };
  return newton_solve(equation, jacobian, start, opts);
}

double edf_trace(const GamDesign& design, const Eigen::MatrixXd& q_a, const Eigen::VectorXd& y,
                 const Eigen::VectorXd& beta, const AdjustedLink& link) {
  const Eigen::VectorXd w = detail::design_fisher_weights(design.z, beta, link);
  const Eigen::MatrixXd zwz = design.z.transpose() * w.asDiagonal() * design.z;
  const Eigen::MatrixXd full = zwz + q_a + design.t_a;
  return (Eigen::FullPivLU<Eigen::MatrixXd>(full).solve(zwz)).trace();
}

}  // namespace

std::pair<double, std::vector<double>> select_lambda_bic(
    const ObservedSample& sample, const MismeasureSpec& spec, const SplineConfig& config,
    const SolveOptions& opts, std::optional<double> fixed_s) {
  if (config.lambda_grid.empty()) {
    throw DomainError("non-empty lambda_grid", "BIC selection needs candidate values");
  }
  spec.validate();
  const double v_star = spec.v_star();
  const double s = fixed_s ? *fixed_s : estimate_s_hat(sample, v_star);
  const AdjustedLink link(spec.p01, spec.p10, s);
  GamDesign design = build_gam_design(sample, config, {0.0});
  const Eigen::Index n = sample.n();
  const double log_n = std::log(static_cast<double>(n));

  // Ascending sweep with warm starts; the trace is reported in grid order.
  std::vector<std::size_t> order(config.lambda_grid.size());
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    return config.lambda_grid[a] < config.lambda_grid[b];
  });

  std::vector<double> trace(config.lambda_grid.size(),
                            std::numeric_limits<double>::infinity());
  Eigen::VectorXd warm =
      detail::warm_start(design.q(), design.intercept_col, sample.y_star, link);
  bool any_ok = false;
  for (std::size_t ix : order) {
    const double lambda = config.lambda_grid[ix];
    const Eigen::MatrixXd q_a = lambda * design.penalty_unit;
    try {
      auto [beta, diag] = solve_penalized(design, q_a, sample.y_star, link, warm, opts);
      const double loglik = detail::design_loglik(design.z, sample.y_star, beta, link);
      const double edf = edf_trace(design, q_a, sample.y_star, beta, link);
      trace[ix] = -2.0 * static_cast<double>(n) * loglik + log_n * edf;
      warm = beta;
      any_ok = true;
    } catch (const Error&) {
      // failed grid point: recorded as +inf and skipped
    }
  }
  if (!any_ok) throw AllGridFailed("no lambda grid point produced a converged fit");

  std::size_t best = 0;
  double best_bic = std::numeric_limits<double>::infinity();
  double best_lambda = std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < trace.size(); ++i) {
    const double lambda = config.lambda_grid[i];
    if (trace[i] < best_bic ||
        (trace[i] == best_bic && lambda < best_lambda)) {
      best = i;
      best_bic = trace[i];
      best_lambda = lambda;
    }
  }
  return {config.lambda_grid[best], trace};
}

FitResult fit_gam_ee(const ObservedSample& sample, const MismeasureSpec& spec,
                     const SplineConfig& config, const SolveOptions& opts,
                     std::optional<double> fixed_s) {
  sample.validate();
  spec.validate();
  const double v_star = spec.v_star();
  const double s = fixed_s ? *fixed_s : estimate_s_hat(sample, v_star);
  const AdjustedLink link(spec.p01, spec.p10, s);

  double lambda_star = 0.0;
  std::vector<double> trace;
  if (config.lambda_grid.size() == 1) {
    lambda_star = config.lambda_grid[0];
  } else if (config.lambda_grid.size() > 1) {
    std::tie(lambda_star, trace) = select_lambda_bic(sample, spec, config, opts, fixed_s);
  }

  GamDesign design = build_gam_design(sample, config, {lambda_star});
  const Eigen::VectorXd start =
      detail::warm_start(design.q(), design.intercept_col, sample.y_star, link);
  auto [beta, diag] = solve_penalized(design, design.q_a, sample.y_star, link, start, opts);
  detail::check_range_collapse(design.z, beta, link);
  if (penalized_loglik(beta, s, design, sample.y_star, link) <
      penalized_loglik(start, s, design, sample.y_star, link) - 1e-10) {
    std::vector<double> last(beta.data(), beta.data() + beta.size());
    throw NonConvergence(
        "Newton reached a stationary point with a lower penalized likelihood than the warm "
        "start (score underflow outside the informative band of the link)",
        diag.iterations, diag.final_score_norm, last);
  }

  FitResult fit;
  fit.theta.s = s;
  fit.theta.beta = beta;
  fit.theta.u = detail::design_u_hat(design.z, design.treatment_col, sample.y_star, beta);
  fit.tau_hat = tau_from_u(fit.theta.u, v_star);
  fit.diagnostics = diag;
  fit.v_star = v_star;
  fit.lambda_selected = lambda_star;
  fit.bic_trace = std::move(trace);

  // Variance: H keeps the difference penalty (ridge off), psi rows are
  // unpenalized.
  const detail::StackedSystem sys{design.z, design.treatment_col, sample.y_star, v_star,
                                  spec.p01, spec.p10};
  detail::finish_inference(sys, fit, /*include_s=*/!fixed_s.has_value(), &design.q_a);
  return fit;
}

}  // namespace odsate
