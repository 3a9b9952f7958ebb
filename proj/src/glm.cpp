#include "odsate/glm.hpp"

#include <cmath>

#include "odsate/errors.hpp"
#include "stacked_detail.hpp"

namespace odsate {

namespace {
constexpr Eigen::Index kTreatmentCol = 1;  // design rows are (1, t, x)
}

double estimate_s_hat(const ObservedSample& sample, double v_star) {
  if (!(v_star > 0.0 && v_star < 1.0)) {
    throw DomainError("0 < v* < 1", "observed prevalence must be interior");
  }
  const double cases = sample.y_star.sum();
  const double controls = static_cast<double>(sample.n()) - cases;
  if (cases == 0.0 || controls == 0.0) {
    throw DegenerateSample("sampling-ratio estimation needs both observed outcome classes");
  }
  return cases * (1.0 - v_star) / (controls * v_star);
}

Eigen::MatrixXd glm_design(const ObservedSample& sample) {
  const Eigen::Index n = sample.n();
  Eigen::MatrixXd z(n, 2 + sample.d());
  z.col(0).setOnes();
  z.col(kTreatmentCol) = sample.t;
  z.rightCols(sample.d()) = sample.x;
  return z;
}

double glm_loglik(const Eigen::VectorXd& beta, const ObservedSample& sample,
                  const AdjustedLink& link) {
  return detail::design_loglik(glm_design(sample), sample.y_star, beta, link);
}

Eigen::VectorXd glm_score(const Eigen::VectorXd& beta, const ObservedSample& sample,
                          const AdjustedLink& link) {
  return detail::design_score(glm_design(sample), sample.y_star, beta, link);
}

Eigen::MatrixXd glm_score_jacobian(const Eigen::VectorXd& beta, const ObservedSample& sample,
                                   const AdjustedLink& link) {
  return detail::design_score_jacobian(glm_design(sample), sample.y_star, beta, link);
}

Eigen::Vector4d compute_u_hat(const Eigen::VectorXd& beta, const ObservedSample& sample) {
  return detail::design_u_hat(glm_design(sample), kTreatmentCol, sample.y_star, beta);
}

double tau_from_u(const Eigen::Vector4d& u, double v_star) {
  return v_star * u[0] + (1.0 - v_star) * u[1] - v_star * u[2] - (1.0 - v_star) * u[3];
}

Eigen::MatrixXd glm_stacked_psi(const GlmTheta& theta, const ObservedSample& sample,
                                const MismeasureSpec& spec) {
  const Eigen::MatrixXd z = glm_design(sample);
  const detail::StackedSystem sys{z, kTreatmentCol, sample.y_star, spec.v_star(), spec.p01,
                                  spec.p10};
  return detail::stacked_psi(sys, theta.s, theta.beta, theta.u, /*include_s=*/true);
}

Eigen::MatrixXd glm_stacked_jacobian(const GlmTheta& theta, const ObservedSample& sample,
                                     const MismeasureSpec& spec) {
  const Eigen::MatrixXd z = glm_design(sample);
  const detail::StackedSystem sys{z, kTreatmentCol, sample.y_star, spec.v_star(), spec.p01,
                                  spec.p10};
  return detail::stacked_jacobian(sys, theta.s, theta.beta, theta.u, /*include_s=*/true,
                                  nullptr);
}

FitResult fit_glm_ee(const ObservedSample& sample, const MismeasureSpec& spec,
                     const SolveOptions& opts, std::optional<double> fixed_s) {
  sample.validate();
  spec.validate();
  const double v_star = spec.v_star();
  const double s = fixed_s ? *fixed_s : estimate_s_hat(sample, v_star);
  if (!(s > 0.0) || !std::isfinite(s)) {
    throw DomainError("s > 0", "sampling ratio must be a positive real");
  }
  const AdjustedLink link(spec.p01, spec.p10, s);
  const Eigen::MatrixXd z = glm_design(sample);

  const auto equation = [&](const Eigen::VectorXd& b) {
    return detail::design_score(z, sample.y_star, b, link);
  };
  const auto jacobian = [&](const Eigen::VectorXd& b) {
    return detail::design_score_jacobian(z, sample.y_star, b, link);
  };
  const Eigen::VectorXd start = detail::warm_start(z.cols(), 0, sample.y_star, link);
  auto [beta, diag] = newton_solve(equation, jacobian, start, opts);

  detail::check_range_collapse(z, beta, link);
  detail::check_likelihood_progress(z, sample.y_star, start, beta, link, diag);

  FitResult fit;
  fit.theta.s = s;
  fit.theta.beta = beta;
  fit.theta.u = detail::design_u_hat(z, kTreatmentCol, sample.y_star, beta);
  fit.tau_hat = tau_from_u(fit.theta.u, v_star);
  fit.diagnostics = diag;
  fit.v_star = v_star;

  const detail::StackedSystem sys{z, kTreatmentCol, sample.y_star, v_star, spec.p01, spec.p10};
  detail::finish_inference(sys, fit, /*include_s=*/!fixed_s.has_value(), nullptr);
  return fit;
}

}  // namespace odsate
