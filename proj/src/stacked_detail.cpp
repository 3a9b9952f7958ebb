#include "stacked_detail.hpp"

#include <algorithm>
#include <cmath>

#include "odsate/errors.hpp"

namespace odsate::detail {

namespace {

double clamp_prob(double p) { return std::clamp(p, kMuEps, 1.0 - kMuEps); }

// eta shifted so the treatment coordinate reads `t` instead of its sample value.
inline double eta_with_treatment(double eta, double t_obs, double beta_t, double t) {
  return eta + (t - t_obs) * beta_t;
}

}  // namespace

Eigen::VectorXd warm_start(Eigen::Index n_beta, Eigen::Index intercept_col,
                           const Eigen::VectorXd& y, const AdjustedLink& link) {
  const double lo = link.infimum();
  const double hi = link.supremum();
  const double margin = 0.01 * (hi - lo);
  const double m = std::clamp(std::clamp(y.mean(), 0.01, 0.99), lo + margin, hi - margin);
  // h(eta) = s(a + b e^eta) / (c0 + c1 e^eta) = m  =>  e^eta as a ratio.
  const double s = link.s();
  const double a = link.p01();
  const double b = 1.0 - link.p10();
  const double c0 = 1.0 + a * (s - 1.0);
  const double c1 = 1.0 + b * (s - 1.0);
  const double e = (c0 * m - s * a) / (s * b - c1 * m);
  Eigen::VectorXd beta = Eigen::VectorXd::Zero(n_beta);
  beta[intercept_col] = std::log(e);
  return beta;
}

void check_likelihood_progress(const Eigen::MatrixXd& z, const Eigen::VectorXd& y,
                               const Eigen::VectorXd& start, const Eigen::VectorXd& solution,
                               const AdjustedLink& link, const SolveDiagnostics& diag) {
  const double at_start = design_loglik(z, y, start, link);
  const double at_solution = design_loglik(z, y, solution, link);
  if (at_solution < at_start - 1e-10) {
    std::vector<double> last(solution.data(), solution.data() + solution.size());
    throw NonConvergence(
        "Newton reached a stationary point with a lower likelihood than the warm start "
        "(score underflow outside the informative band of the link)",
        diag.iterations, diag.final_score_norm, last);
  }
}

double design_loglik(const Eigen::MatrixXd& z, const Eigen::VectorXd& y,
                     const Eigen::VectorXd& beta, const AdjustedLink& link) {
  const Eigen::Index n = z.rows();
  const Eigen::VectorXd eta = z * beta;
  double acc = 0.0;
  for (Eigen::Index i = 0; i < n; ++i) {
    const double mu = clamp_prob(link(eta[i]));
    acc += y[i] * std::log(mu) + (1.0 - y[i]) * std::log(1.0 - mu);
  }
  return acc / static_cast<double>(n);
}

Eigen::VectorXd design_score(const Eigen::MatrixXd& z, const Eigen::VectorXd& y,
                             const Eigen::VectorXd& beta, const AdjustedLink& link) {
  const Eigen::Index n = z.rows();
  const Eigen::VectorXd eta = z * beta;
  Eigen::VectorXd score = Eigen::VectorXd::Zero(beta.size());
  for (Eigen::Index i = 0; i < n; ++i) {
    const LinkDerivs d = link.derivs(eta[i]);
    const double mu = clamp_prob(d.h);
    const double v = std::max(mu * (1.0 - mu), kMuEps);
    score += z.row(i).transpose() * ((y[i] - mu) * d.h1 / v);
  }
  return score / static_cast<double>(n);
}

Eigen::MatrixXd design_score_jacobian(const Eigen::MatrixXd& z, const Eigen::VectorXd& y,
                                      const Eigen::VectorXd& beta, const AdjustedLink& link) {
  const Eigen::Index n = z.rows();
  const Eigen::VectorXd eta = z * beta;
  Eigen::VectorXd w(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    const LinkDerivs d = link.derivs(eta[i]);
    const double mu = clamp_prob(d.h);
    const double v = std::max(mu * (1.0 - mu), kMuEps);
    w[i] = d.h1 * d.h1 / v -
           (y[i] - mu) * (d.h2 * v - d.h1 * d.h1 * (1.0 - 2.0 * mu)) / (v * v);
  }
  return -(z.transpose() * w.asDiagonal() * z) / static_cast<double>(n);
}

Eigen::VectorXd design_fisher_weights(const Eigen::MatrixXd& z, const Eigen::VectorXd& beta,
                                      const AdjustedLink& link) {
  const Eigen::Index n = z.rows();
  const Eigen::VectorXd eta = z * beta;
  Eigen::VectorXd w(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    const LinkDerivs d = link.derivs(eta[i]);
    const double mu = clamp_prob(d.h);
    const double v = std::max(mu * (1.0 - mu), kMuEps);
    w[i] = d.h1 * d.h1 / v;
  }
  return w;
}

Eigen::Vector4d design_u_hat(const Eigen::MatrixXd& z, Eigen::Index treatment_col,
                             const Eigen::VectorXd& y, const Eigen::VectorXd& beta) {
  const Eigen::Index n = z.rows();
  const double n_case = y.sum();
  const double n_ctrl = static_cast<double>(n) - n_case;
  if (n_case == 0.0 || n_ctrl == 0.0) {
    throw DegenerateSample("class-conditional means need both observed outcome classes");
  }
  const Eigen::VectorXd eta = z * beta;
  const double beta_t = beta[treatment_col];
  Eigen::Vector4d sums = Eigen::Vector4d::Zero();
  for (Eigen::Index i = 0; i < n; ++i) {
    const double t_obs = z(i, treatment_col);
    const double g1 = expit(eta_with_treatment(eta[i], t_obs, beta_t, 1.0));
    const double g0 = expit(eta_with_treatment(eta[i], t_obs, beta_t, 0.0));
    sums[0] += y[i] * g1;
    sums[1] += (1.0 - y[i]) * g1;
    sums[2] += y[i] * g0;
    sums[3] += (1.0 - y[i]) * g0;
  }
  return {sums[0] / n_case, sums[1] / n_ctrl, sums[2] / n_case, sums[3] / n_ctrl};
}

Eigen::MatrixXd stacked_psi(const StackedSystem& sys, double s, const Eigen::VectorXd& beta,
                            const Eigen::Vector4d& u, bool include_s) {
  const Eigen::Index n = sys.z.rows();
  const Eigen::Index nb = beta.size();
  const Eigen::Index off = include_s ? 1 : 0;
  const AdjustedLink link(sys.p01, sys.p10, s);
  const Eigen::VectorXd eta = sys.z * beta;
  const double beta_t = beta[sys.treatment_col];

  Eigen::MatrixXd psi(n, off + nb + 4);
  for (Eigen::Index i = 0; i < n; ++i) {
    const double y = sys.y[i];
    if (include_s) psi(i, 0) = s * sys.v_star * (1.0 - y) - (1.0 - sys.v_star) * y;

    const LinkDerivs d = link.derivs(eta[i]);
    const double mu = std::clamp(d.h, kMuEps, 1.0 - kMuEps);
    const double v = std::max(mu * (1.0 - mu), kMuEps);
    psi.row(i).segment(off, nb) = sys.z.row(i) * ((y - mu) * d.h1 / v);

    const double t_obs = sys.z(i, sys.treatment_col);
    const double g1 = expit(eta_with_treatment(eta[i], t_obs, beta_t, 1.0));
    const double g0 = expit(eta_with_treatment(eta[i], t_obs, beta_t, 0.0));
    psi(i, off + nb + 0) = y * (u[0] - g1);
    psi(i, off + nb + 1) = (1.0 - y) * (u[1] - g1);
    psi(i, off + nb + 2) = y * (u[2] - g0);
    psi(i, off + nb + 3) = (1.0 - y) * (u[3] - g0);
  }
  return psi;
}

Eigen::MatrixXd stacked_jacobian(const StackedSystem& sys, double s, const Eigen::VectorXd& beta,
                                 const Eigen::Vector4d& u, bool include_s,
                                 const Eigen::MatrixXd* beta_penalty_mean) {
  (void)u;  // psi_u is affine in u with unit diagonal blocks; u itself drops out
  const Eigen::Index n = sys.z.rows();
  const Eigen::Index nb = beta.size();
  const Eigen::Index off = include_s ? 1 : 0;
  const Eigen::Index dim = off + nb + 4;
  const double dn = static_cast<double>(n);
  const AdjustedLink link(sys.p01, sys.p10, s);
  const Eigen::VectorXd eta = sys.z * beta;
  const double beta_t = beta[sys.treatment_col];
  const double y_bar = sys.y.mean();

  Eigen::MatrixXd jac = Eigen::MatrixXd::Zero(dim, dim);
  if (include_s) jac(0, 0) = sys.v_star * (1.0 - y_bar);

  Eigen::VectorXd w(n);        // -dU/deta
  Eigen::VectorXd du_ds(n);    // dU/ds
  Eigen::MatrixXd grad_u = Eigen::MatrixXd::Zero(4, nb);
  for (Eigen::Index i = 0; i < n; ++i) {
    const double y = sys.y[i];
    const LinkDerivs d = link.derivs(eta[i]);
    const double mu = std::clamp(d.h, kMuEps, 1.0 - kMuEps);
    const double v = std::max(mu * (1.0 - mu), kMuEps);
    const double r = y - mu;
    w[i] = d.h1 * d.h1 / v - r * (d.h2 * v - d.h1 * d.h1 * (1.0 - 2.0 * mu)) / (v * v);
    du_ds[i] = -d.hs * d.h1 / v + r * (d.h1s * v - d.h1 * d.hs * (1.0 - 2.0 * mu)) / (v * v);

    const double t_obs = sys.z(i, sys.treatment_col);
    const double g1 = expit(eta_with_treatment(eta[i], t_obs, beta_t, 1.0));
    const double g0 = expit(eta_with_treatment(eta[i], t_obs, beta_t, 0.0));
    Eigen::RowVectorXd z1 = sys.z.row(i);
    z1[sys.treatment_col] = 1.0;
    Eigen::RowVectorXd z0 = sys.z.row(i);
    z0[sys.treatment_col] = 0.0;
    grad_u.row(0) -= y * g1 * (1.0 - g1) * z1;
    grad_u.row(1) -= (1.0 - y) * g1 * (1.0 - g1) * z1;
    grad_u.row(2) -= y * g0 * (1.0 - g0) * z0;
    grad_u.row(3) -= (1.0 - y) * g0 * (1.0 - g0) * z0;
  }

  if (include_s) jac.block(off, 0, nb, 1) = sys.z.transpose() * du_ds / dn;
  jac.block(off, off, nb, nb) = -(sys.z.transpose() * w.asDiagonal() * sys.z) / dn;
  if (beta_penalty_mean != nullptr) {
    jac.block(off, off, nb, nb) -= *beta_penalty_mean / dn;
  }
  jac.block(off + nb, off, 4, nb) = grad_u / dn;
  jac(off + nb + 0, off + nb + 0) = y_bar;
  jac(off + nb + 1, off + nb + 1) = 1.0 - y_bar;
  jac(off + nb + 2, off + nb + 2) = y_bar;
  jac(off + nb + 3, off + nb + 3) = 1.0 - y_bar;
  return jac;
}

Eigen::VectorXd tau_gradient(double v_star, Eigen::Index n_beta, bool include_s) {
  const Eigen::Index off = include_s ? 1 : 0;
  Eigen::VectorXd q = Eigen::VectorXd::Zero(off + n_beta + 4);
  q[off + n_beta + 0] = v_star;
  q[off + n_beta + 1] = 1.0 - v_star;
  q[off + n_beta + 2] = -v_star;
  q[off + n_beta + 3] = v_star - 1.0;
  return q;
}

void check_range_collapse(const Eigen::MatrixXd& z, const Eigen::VectorXd& beta,
                          const AdjustedLink& link) {
  const Eigen::VectorXd eta = z * beta;
  Eigen::Index clamped = 0;
  for (Eigen::Index i = 0; i < eta.size(); ++i) {
    const double h = link(eta[i]);
    if (h <= kMuEps || h >= 1.0 - kMuEps) ++clamped;
  }
  const double fraction = static_cast<double>(clamped) / static_cast<double>(z.rows());
  if (fraction > kCollapseFraction) {
    throw RangeCollapse(
        "fitted means hit the probability clamp for more than 10% of rows; the "
        "achievable mean range has collapsed for this (p01, p10, s)",
        fraction);
  }
}

void finish_inference(const StackedSystem& sys, FitResult& fit, bool include_s,
                      const Eigen::MatrixXd* beta_penalty_mean) {
  const Eigen::Index n = sys.z.rows();
  const Eigen::MatrixXd psi =
      stacked_psi(sys, fit.theta.s, fit.theta.beta, fit.theta.u, include_s);
  const Eigen::MatrixXd jac = stacked_jacobian(sys, fit.theta.s, fit.theta.beta, fit.theta.u,
                                               include_s, beta_penalty_mean);
  const Eigen::MatrixXd cov = sandwich_covariance(psi, -jac, &fit.sandwich_info);
  fit.v_hat = static_cast<double>(n) * cov;
  const Eigen::VectorXd q = tau_gradient(sys.v_star, fit.theta.beta.size(), include_s);
  fit.tau_se = std::sqrt(std::max(0.0, static_cast<double>(q.transpose() * cov * q)));
  fit.tau_ci95 = {fit.tau_hat - kZ95 * fit.tau_se, fit.tau_hat + kZ95 * fit.tau_se};
}

}  // namespace odsate::detail
