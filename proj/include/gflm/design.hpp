#pragma once

// GLMM design for the penalized-spline representation of the functional
// coefficient: eta = X beta + Z u with u ~ N(0, sigma^2_u I).

#include "gflm/bases.hpp"

#include <Eigen/Dense>

#include <string_view>

namespace gflm {

enum class Hypothesis { nullity, functionality, linearity };

std::string_view to_string(Hypothesis h);
Hypothesis parse_hypothesis(std::string_view name);

/// Difference-penalty order whose null space is the hypothesis:
/// nullity -> 0, functionality -> 1, linearity -> 2.
constexpr int penalty_order(Hypothesis h) noexcept {
  switch (h) {
    case Hypothesis::nullity: return 0;
    case Hypothesis::functionality: return 1;
    case Hypothesis::linearity: return 2;
  }
  return 0;
}

enum class JQuadrature {
  trapezoid,          // trapezoid rule on the common grid
  piecewise_linear,   // exact integral of the linear interpolant of psi
};

/// J(k, l) = integral of psi_k(t) B_l(t) dt.
Eigen::MatrixXd compute_J(const Eigen::MatrixXd& psi, const SplineBasis& basis,
                          const Eigen::VectorXd& grid,
                          JQuadrature rule = JQuadrature::trapezoid);

struct GlmmDesign {
  Hypothesis hypothesis = Hypothesis::nullity;
  int order = 0;
  Eigen::MatrixXd J;        // K_x x K_u
  Eigen::MatrixXd fixed;    // X: n x (1 + d), intercept first
  Eigen::MatrixXd random;   // Z: n x (K_u - d)

  Eigen::Index num_subjects() const noexcept { return fixed.rows(); }
};

/// X = [1 | xi J Q2], Z = xi J Q1 Lambda1^{-1/2}.
GlmmDesign build_design(const Eigen::MatrixXd& scores, const Eigen::MatrixXd& J,
                        const PenaltyDecomposition& pen, Hypothesis hypothesis);

/// beta(t) = B(t)^T (Q1 u* + Q2 beta*) on `grid`.
Eigen::VectorXd coefficient_from_effects(const PenaltyDecomposition& pen,
                                         const SplineBasis& basis,
                                         const Eigen::VectorXd& grid,
                                         const Eigen::VectorXd& beta_star,
                                         const Eigen::VectorXd& u_star);

/// Maps the working-model random effects u = Lambda1^{1/2} u* back to u*.
Eigen::VectorXd penalized_effects(const PenaltyDecomposition& pen,
                                  const Eigen::VectorXd& u);

}  // namespace gflm
