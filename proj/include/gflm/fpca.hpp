#pragma once

// Functional principal components for possibly sparse, noisy curves observed
// on a common grid: smoothed mean, smoothed covariance with the measurement
// noise split off the diagonal, quadrature-weighted eigendecomposition,
// subject scores and AIC choice of the truncation.

#include "gflm/data.hpp"

#include <Eigen/Dense>

#include <vector>

namespace gflm {

struct FpcaOptions {
  bool pre_centered = false;   // skip mean estimation, treat mu as zero
  int mean_basis = 20;         // cubic B-splines for the mean smoother
  int cov_basis = 12;          // per-axis cubic B-splines for the covariance
  int max_components = 20;     // AIC candidate upper bound
  double eigen_rel_tol = 1e-10;
};

struct CovarianceEstimate {
  Eigen::MatrixXd smoothed;       // m x m, symmetric
  Eigen::VectorXd raw_diagonal;   // pooled raw variance per grid point
  double noise_var = 0.0;         // sigma^2_X
};

struct Spectrum {
  Eigen::VectorXd values;     // strictly positive, nonincreasing
  Eigen::MatrixXd functions;  // m x K, orthonormal under trapezoid weights
};

struct FpcaModel {
  Eigen::VectorXd grid;
  Eigen::VectorXd mean;
  Eigen::VectorXd eigenvalues;      // all retained (positive) eigenvalues
  Eigen::MatrixXd eigenfunctions;   // m x eigenvalues.size()
  Eigen::VectorXd raw_diagonal;
  double noise_var = 0.0;
  int num_components = 0;           // K_x, set by finalize_fpca
  Eigen::MatrixXd scores;           // n x K_x

  int max_components() const noexcept {
    return static_cast<int>(eigenvalues.size());
  }
  /// First K_x eigenfunctions.
  Eigen::MatrixXd basis() const {
    return eigenfunctions.leftCols(num_components);
  }
};

enum class ScoreMethod {
  automatic,   // quadrature for fully observed subjects, BLUP otherwise
  quadrature,
  blup,
};

Eigen::VectorXd estimate_mean(const FunctionalDataset& data,
                              const FpcaOptions& options = {});

CovarianceEstimate estimate_covariance(const FunctionalDataset& data,
                                       const Eigen::VectorXd& mean,
                                       const FpcaOptions& options = {});

Spectrum eigen_decompose(const Eigen::MatrixXd& cov,
                         const Eigen::VectorXd& grid,
                         double rel_tol = 1e-10);

/// n x K score matrix. `eigenvalues` and `eigenfunctions` must have at
/// least K entries/columns.
Eigen::MatrixXd estimate_scores(const FunctionalDataset& data,
                                const Eigen::VectorXd& mean,
                                const Eigen::VectorXd& eigenvalues,
                                const Eigen::MatrixXd& eigenfunctions,
                                double noise_var, int num_components,
                                ScoreMethod method = ScoreMethod::automatic);

/// AIC(k) = N log(sigma^2_[k]) + N + 2 n k for k = 1..K, where sigma^2_[k]
/// integrates the raw diagonal minus the k-term model diagonal (floored at
/// 1e-10).
std::vector<double> aic_curve(const FunctionalDataset& data,
                              const FpcaModel& model, int max_k);

/// max(AIC minimizer, d_max + 1). The scan covers k up to
/// min(max_k, number of positive eigenvalues).
int select_kx(const FunctionalDataset& data, const FpcaModel& model,
              int d_max, int max_k = 20);

/// Mean, covariance and spectrum; scores and K_x are left empty.
FpcaModel fit_fpca(const FunctionalDataset& data,
                   const FpcaOptions& options = {});

/// Sets K_x and computes the score matrix.
void finalize_fpca(FpcaModel& model, const FunctionalDataset& data,
                   int num_components,
                   ScoreMethod method = ScoreMethod::automatic);

}  // namespace gflm
