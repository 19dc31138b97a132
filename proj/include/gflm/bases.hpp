#pragma once

// B-spline bases on an interval, difference penalties, and the penalty
// eigendecomposition that splits spline coefficients into penalized and
// unpenalized parts.

#include <Eigen/Dense>

#include <vector>

namespace gflm {

/// Placement of the `degree` knots beyond each end of the domain.
enum class KnotLayout {
  uniform,  // continue the equal spacing outside the domain (P-spline)
  clamped,  // repeat each boundary breakpoint `degree + 1` times
};

/// B-spline basis on `num_basis - degree + 1` equally spaced breakpoints of
/// [domain_lo, domain_hi]. `num_basis` is the column count of every
/// evaluation matrix.
///
/// With the uniform layout, coefficient vectors that are polynomial of degree
/// < `degree` in the index reproduce polynomials of the same degree in t, so
/// the null space of a d-th order difference penalty is exactly the
/// polynomials of degree d - 1.
class SplineBasis {
 public:
  SplineBasis(double domain_lo, double domain_hi, int num_basis, int degree,
              KnotLayout layout = KnotLayout::uniform);

  double domain_lo() const noexcept { return lo_; }
  double domain_hi() const noexcept { return hi_; }
  int degree() const noexcept { return degree_; }
  int num_basis() const noexcept { return num_basis_; }
  KnotLayout layout() const noexcept { return layout_; }
  const std::vector<double>& knots() const noexcept { return knots_; }

  /// Values of all basis functions at `t`. Throws if `t` is outside the domain.
  Eigen::VectorXd evaluate(double t) const;

  /// Index of the first nonzero basis function at `t`; the `degree + 1`
  /// functions starting there are the only nonzero ones.
  int span_start(double t) const;

  /// Writes the `degree + 1` nonzero values at `t` into `out` and returns the
  /// index of the first one.
  int evaluate_local(double t, double* out) const;

 private:
  double lo_;
  double hi_;
  int num_basis_;
  int degree_;
  KnotLayout layout_;
  std::vector<double> knots_;
};

SplineBasis build_basis(double domain_lo, double domain_hi, int num_basis = 30,
                        int degree = 3,
                        KnotLayout layout = KnotLayout::uniform);

/// len(grid) x K_u evaluation matrix.
Eigen::MatrixXd evaluate_basis(const SplineBasis& basis,
                               const Eigen::VectorXd& grid);

/// P_0 = I; P_d = D_d^T D_d for d in {1, 2}.
Eigen::MatrixXd difference_penalty(int num_basis, int order);

struct PenaltyDecomposition {
  int order = 0;
  Eigen::MatrixXd penalty;   // P_d
  Eigen::MatrixXd q_pen;     // Q1, K_u x (K_u - d)
  Eigen::MatrixXd q_null;    // Q2, K_u x d
  Eigen::VectorXd lambda;    // Lambda1, descending, strictly positive

  int num_basis() const noexcept { return static_cast<int>(penalty.rows()); }
};

/// Eigendecomposition P_d = Q1 Lambda1 Q1^T with Q2 spanning the null space.
/// Eigenvalues below 1e-8 times the largest count as zero; the count must
/// equal `order` exactly.
PenaltyDecomposition decompose_penalty(const Eigen::MatrixXd& penalty,
                                       int order);

}  // namespace gflm
