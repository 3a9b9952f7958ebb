#pragma once

#include <Eigen/Dense>

namespace odsate {

// Clamped (open) uniform knot vector on [lo, hi] for `segments` equal-width
// intervals and B-splines of polynomial degree `degree`: the boundary knots
// repeat degree+1 times, giving segments + degree basis functions.
Eigen::VectorXd clamped_knots(double lo, double hi, int segments, int degree);

// All basis values of the degree-`degree` B-splines on `knots` at x, computed
// with the two-term Cox - de Boor recursion evaluated locally. The length is
// knots.size() - degree - 1; at most degree+1 entries are nonzero and they
// sum to 1 inside the interior span. x outside
// [knots[degree], knots[end-degree-1]] is clamped to that boundary.
// Throws DomainError on a malformed knot vector.
Eigen::VectorXd bspline_basis(double x, int degree, const Eigen::VectorXd& knots);

// Row-per-point design matrix of bspline_basis values.
Eigen::MatrixXd bspline_design(const Eigen::VectorXd& x, int degree,
                               const Eigen::VectorXd& knots);

// m-th order difference operator for dim_q coefficients: (q-m) x q matrix D
// with (D b) = m-th forward differences of b, so D' D is the usual P-spline
// penalty. Throws DomainError unless 1 <= order_m < dim_q.
Eigen::MatrixXd difference_penalty(int order_m, int dim_q);

}  // namespace odsate
