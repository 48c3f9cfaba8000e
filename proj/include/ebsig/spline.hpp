#pragma once

#include <Eigen/Dense>
#include <span>
#include <vector>

namespace ebsig {

// Natural cubic spline design matrix with `dof` free columns, evaluated at
// log(values). Knots sit at evenly spaced sample quantiles of log(values)
// (dof+1 of them); the cardinal interpolation basis on those knots is column
// centered and its last column dropped, so the span excludes constants and the
// returned matrix has full column rank dof.
Eigen::MatrixXd natural_spline_basis(std::span<const double> values, int dof);

// The knot locations the basis above uses (on the log scale).
std::vector<double> natural_spline_knots(std::span<const double> values,
                                         int dof);

}  // namespace ebsig
