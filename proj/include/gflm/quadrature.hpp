#pragma once

#include <Eigen/Dense>

namespace gflm {

/// Trapezoidal weights on a strictly increasing grid: sum_j w_j f(t_j)
/// approximates the integral of f over [t_0, t_last].
Eigen::VectorXd trapezoid_weights(const Eigen::VectorXd& grid);

/// Piecewise-linear interpolation of `values` (given on `grid`) at `t`.
double interpolate_linear(const Eigen::VectorXd& grid,
                          const Eigen::VectorXd& values, double t);

/// Throws std::invalid_argument unless the grid has at least two strictly
/// increasing finite points.
void require_increasing_grid(const Eigen::VectorXd& grid);

}  // namespace gflm
