#pragma once

// Penalized quasi-likelihood for eta = X beta + Z u, u ~ N(0, sigma^2_u I):
// alternate a normalized working response with a working linear mixed model
// fitted by restricted maximum likelihood.

#include "gflm/design.hpp"
#include "gflm/family.hpp"

#include <Eigen/Dense>

#include <optional>

namespace gflm {

struct WorkingResponse {
  Eigen::VectorXd y;        // W^{1/2} [eta + g'(mu) (y - mu)]
  Eigen::VectorXd weights;  // W = 1 / (g'(mu)^2 V(mu))
};

/// `trials` may be empty for families other than binomial. Binomial `y`
/// holds success counts.
WorkingResponse working_response(const Eigen::VectorXd& y,
                                 const Eigen::VectorXd& eta,
                                 const Family& family,
                                 const Eigen::VectorXd& trials = {});

/// Spectral form of the restricted log-likelihood of the working model
/// y ~ N(X beta, sigma^2_e (I + lambda Z Z^T)) profiled over beta and
/// sigma^2_e:
///
///   REL(lambda) = -1/2 [ log|X^T X| + sum_s log(1 + lambda mu_s)
///                        + (n - p) log q(lambda) ],
///   q(lambda)   = sum_s w_s^2 / (1 + lambda mu_s) + tail,
///
/// where mu_s are the positive eigenvalues of Z^T P0 Z, P0 = I - X(X^TX)^-1 X^T,
/// w_s the projections of P0 y on the matching directions, and tail the
/// remaining residual sum of squares. One decomposition, then O(K) per lambda.
class RemlSpectrum {
 public:
  RemlSpectrum(const Eigen::VectorXd& y, const Eigen::MatrixXd& X,
               const Eigen::MatrixXd& Z);

  double rel(double lambda) const;
  /// y^T P^T V^{-1} P y at lambda (the profiled residual quadratic form).
  double quadratic(double lambda) const;

  const Eigen::VectorXd& eigenvalues() const noexcept { return mu_; }
  Eigen::Index n() const noexcept { return n_; }
  Eigen::Index p() const noexcept { return p_; }

 private:
  Eigen::Index n_;
  Eigen::Index p_;
  double logdet_xtx_ = 0.0;
  Eigen::VectorXd mu_;
  Eigen::VectorXd w2_;
  double tail_ = 0.0;
};

struct RemlProfile {
  double lambda = 0.0;     // sigma^2_u / sigma^2_e
  double sigma2_u = 0.0;
  double sigma2_e = 0.0;
  double rel_at_opt = 0.0;
  double rel_at_zero = 0.0;
};

RemlProfile reml_profile(const Eigen::VectorXd& y, const Eigen::MatrixXd& X,
                         const Eigen::MatrixXd& Z);

struct WorkingLmmFit {
  RemlProfile profile;
  Eigen::VectorXd beta;
  Eigen::VectorXd u;
};

/// REML fit of the working model plus GLS fixed effects and BLUP random
/// effects. With `lambda_fixed` the variance ratio is held at that value.
WorkingLmmFit fit_working_lmm(const Eigen::VectorXd& y,
                              const Eigen::MatrixXd& X,
                              const Eigen::MatrixXd& Z,
                              std::optional<double> lambda_fixed = {});

struct PqlOptions {
  std::optional<double> lambda_fixed;
  double tolerance = 1e-6;
  int max_iterations = 200;
};

struct PqlFit {
  Eigen::VectorXd beta;        // (alpha, beta*)
  Eigen::VectorXd u;           // Lambda1^{1/2} u*
  double sigma2_u = 0.0;
  double sigma2_e = 0.0;
  double lambda = 0.0;
  double rel_at_opt = 0.0;
  double rel_at_zero = 0.0;
  Eigen::VectorXd eta;
  Eigen::VectorXd y_work;
  Eigen::VectorXd weights;
  Eigen::MatrixXd x_work;
  Eigen::MatrixXd z_work;
  int iterations = 0;
  bool converged = false;
  bool diverged = false;       // eta ran past the mean clip everywhere
};

PqlFit pql_fit(const GlmmDesign& design, const Eigen::VectorXd& y,
               const Family& family, const Eigen::VectorXd& trials = {},
               const PqlOptions& options = {});

}  // namespace gflm
