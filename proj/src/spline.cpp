#include "odsate/spline.hpp"

#include <algorithm>
#include <cmath>

#include "odsate/errors.hpp"

namespace odsate {

Eigen::VectorXd clamped_knots(double lo, double hi, int segments, int degree) {
  if (!(lo < hi)) throw DomainError("knot range", "lo must be strictly below hi");
  if (segments < 1) throw DomainError("segments", "need at least one interval");
  if (degree < 0) throw DomainError("degree", "must be nonnegative");
  Eigen::VectorXd knots(segments + 1 + 2 * degree);
  for (int i = 0; i < degree; ++i) knots[i] = lo;
  for (int i = 0; i <= segments; ++i) {
    knots[degree + i] = lo + (hi - lo) * static_cast<double>(i) / segments;
  }
  for (int i = 0; i < degree; ++i) knots[degree + segments + 1 + i] = hi;
  return knots;
}

Eigen::VectorXd bspline_basis(double x, int degree, const Eigen::VectorXd& knots) {
  if (degree < 0) throw DomainError("degree", "must be nonnegative");
  const Eigen::Index t = knots.size();
  const Eigen::Index nbasis = t - degree - 1;
  if (nbasis < 1) throw DomainError("knot vector", "too short for the requested degree");
  for (Eigen::Index i = 1; i < t; ++i) {
    if (knots[i] < knots[i - 1]) throw DomainError("knot vector", "must be non-decreasing");
  }
  const double lo = knots[degree];
  const double hi = knots[t - degree - 1];
  if (!(lo < hi)) throw DomainError("knot vector", "interior range is empty");
  x = std::clamp(x, lo, hi);

  // Locate the span [knots[span], knots[span+1]) containing x; the right
  // endpoint belongs to the last nonempty span so the basis still sums to 1.
  Eigen::Index span;
  if (x >= hi) {
    span = t - degree - 2;
    while (span > degree && knots[span] == knots[span + 1]) --span;
  } else {
    span = std::upper_bound(knots.data() + degree, knots.data() + (t - degree - 1), x) -
           knots.data() - 1;
  }

  // Triangular Cox - de Boor scheme: local[j] = B_{span-degree+j, degree}(x).
  Eigen::VectorXd local = Eigen::VectorXd::Zero(degree + 1);
  local[0] = 1.0;
  Eigen::VectorXd left(degree + 1), right(degree + 1);
  for (int d = 1; d <= degree; ++d) {
    left[d] = x - knots[span + 1 - d];
    right[d] = knots[span + d] - x;
    double saved = 0.0;
    for (int j = 0; j < d; ++j) {
      const double denom = right[j + 1] + left[d - j];
      const double term = denom == 0.0 ? 0.0 : local[j] / denom;
      local[j] = saved + right[j + 1] * term;
      saved = left[d - j] * term;
    }
    local[d] = saved;
  }

  Eigen::VectorXd out = Eigen::VectorXd::Zero(nbasis);
  for (int j = 0; j <= degree; ++j) {
    const Eigen::Index idx = span - degree + j;
    if (idx >= 0 && idx < nbasis) out[idx] = local[j];
  }
  return out;
}

Eigen::MatrixXd bspline_design(const Eigen::VectorXd& x, int degree,
                               const Eigen::VectorXd& knots) {
  const Eigen::Index nbasis = knots.size() - degree - 1;
  Eigen::MatrixXd out(x.size(), nbasis);
  for (Eigen::Index i = 0; i < x.size(); ++i) {
    out.row(i) = bspline_basis(x[i], degree, knots).transpose();
  }
  return out;
}

Eigen::MatrixXd difference_penalty(int order_m, int dim_q) {
  if (order_m < 1) throw DomainError("penalty order", "must be at least 1");
  if (dim_q <= order_m) throw DomainError("penalty order", "needs dim_q > order_m");
  Eigen::MatrixXd d = Eigen::MatrixXd::Identity(dim_q, dim_q);
  for (int m = 0; m < order_m; ++m) {
    const Eigen::Index rows = d.rows() - 1;
    Eigen::MatrixXd next(rows, dim_q);
    for (Eigen::Index i = 0; i < rows; ++i) next.row(i) = d.row(i + 1) - d.row(i);
    d = std::move(next);
  }
  return d;
}

}  // namespace odsate
