#pragma once

// Penalized least squares with the smoothing parameter chosen by generalized
// cross-validation. Shared by the mean and covariance smoothers.

#include <Eigen/Dense>

namespace gflm::detail {

struct PenalizedSystem {
  Eigen::MatrixXd gram;     // B^T W B
  Eigen::VectorXd rhs;      // B^T W y
  double yy = 0.0;          // y^T W y
  double n_obs = 0.0;       // number of observations entering GCV
  Eigen::MatrixXd penalty;  // S
};

struct PenalizedSolution {
  Eigen::VectorXd coef;
  double lambda = 0.0;
  double edf = 0.0;
  double gcv = 0.0;
};

/// Minimizes GCV(lambda) = N * WRSS / (N - edf)^2 over a log grid with
/// golden-section refinement. A ridge of 1e-10 * tr(gram)/p keeps the
/// system definite when the data leave coefficients unidentified.
PenalizedSolution solve_gcv(const PenalizedSystem& system);

}  // namespace gflm::detail
