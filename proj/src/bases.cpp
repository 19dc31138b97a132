#include "gflm/bases.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>

namespace gflm {

namespace {

constexpr int kMaxDegree = 10;

// Flip each column so its largest-magnitude entry is positive.
void fix_signs(Eigen::MatrixXd& vectors) {
  for (Eigen::Index c = 0; c < vectors.cols(); ++c) {
    Eigen::Index arg = 0;
    vectors.col(c).cwiseAbs().maxCoeff(&arg);
    if (vectors(arg, c) < 0.0) vectors.col(c) *= -1.0;
  }
}

}  // namespace

SplineBasis::SplineBasis(double domain_lo, double domain_hi, int num_basis,
                         int degree, KnotLayout layout)
    : lo_(domain_lo),
      hi_(domain_hi),
      num_basis_(num_basis),
      degree_(degree),
      layout_(layout) {
  if (!(domain_lo < domain_hi) || !std::isfinite(domain_lo) ||
      !std::isfinite(domain_hi)) {
    throw std::invalid_argument("spline domain must satisfy lo < hi");
  }
  if (degree < 0 || degree > kMaxDegree) {
    throw std::invalid_argument("spline degree must be in [0, 10]");
  }
  if (num_basis < degree + 1) {
    throw std::invalid_argument("number of basis functions (" +
                                std::to_string(num_basis) +
                                ") must be at least degree + 1 = " +
                                std::to_string(degree + 1));
  }
  const int breakpoints = num_basis - degree + 1;
  const double h = (hi_ - lo_) / (breakpoints - 1);
  const bool clamped = layout == KnotLayout::clamped;
  knots_.reserve(static_cast<std::size_t>(num_basis + degree + 1));
  for (int i = degree; i > 0; --i) knots_.push_back(clamped ? lo_ : lo_ - i * h);
  for (int i = 0; i < breakpoints; ++i) {
    const double frac = static_cast<double>(i) / (breakpoints - 1);
    knots_.push_back(i == breakpoints - 1 ? hi_ : lo_ + frac * (hi_ - lo_));
  }
  for (int i = 1; i <= degree; ++i) knots_.push_back(clamped ? hi_ : hi_ + i * h);
}

int SplineBasis::span_start(double t) const {
  if (!(t >= lo_ && t <= hi_)) {
    throw std::out_of_range("evaluation point " + std::to_string(t) +
                            " outside spline domain");
  }
  // knot interval index i with knots_[i] <= t < knots_[i+1], clamped so the
  // right endpoint belongs to the last interval
  const auto first = knots_.begin() + degree_;
  const auto last = knots_.begin() + num_basis_;
  const auto it = std::upper_bound(first, last + 1, t);
  int span = static_cast<int>(it - knots_.begin()) - 1;
  span = std::clamp(span, degree_, num_basis_ - 1);
  return span - degree_;
}

int SplineBasis::evaluate_local(double t, double* out) const {
  const int start = span_start(t);
  const int span = start + degree_;
  double left[kMaxDegree + 1];
  double right[kMaxDegree + 1];
  out[0] = 1.0;
  for (int j = 1; j <= degree_; ++j) {
    left[j] = t - knots_[span + 1 - j];
    right[j] = knots_[span + j] - t;
    double saved = 0.0;
    for (int r = 0; r < j; ++r) {
      const double temp = out[r] / (right[r + 1] + left[j - r]);
      out[r] = saved + right[r + 1] * temp;
      saved = left[j - r] * temp;
    }
    out[j] = saved;
  }
  return start;
}

Eigen::VectorXd SplineBasis::evaluate(double t) const {
  Eigen::VectorXd row = Eigen::VectorXd::Zero(num_basis_);
  double local[kMaxDegree + 1];
  const int start = evaluate_local(t, local);
  for (int j = 0; j <= degree_; ++j) row(start + j) = local[j];
  return row;
}

SplineBasis build_basis(double domain_lo, double domain_hi, int num_basis,
                        int degree, KnotLayout layout) {
  return SplineBasis(domain_lo, domain_hi, num_basis, degree, layout);
}

Eigen::MatrixXd evaluate_basis(const SplineBasis& basis,
                               const Eigen::VectorXd& grid) {
  Eigen::MatrixXd out = Eigen::MatrixXd::Zero(grid.size(), basis.num_basis());
  double local[kMaxDegree + 1];
  for (Eigen::Index i = 0; i < grid.size(); ++i) {
    const int start = basis.evaluate_local(grid(i), local);
    for (int j = 0; j <= basis.degree(); ++j) out(i, start + j) = local[j];
  }
  return out;
}

Eigen::MatrixXd difference_penalty(int num_basis, int order) {
  if (order < 0 || order > 2) {
    throw std::invalid_argument("difference penalty order must be 0, 1 or 2");
  }
  if (num_basis <= order) {
    throw std::invalid_argument("difference penalty needs more basis "
                                "functions than its order");
  }
  if (order == 0) return Eigen::MatrixXd::Identity(num_basis, num_basis);
  Eigen::MatrixXd diff = Eigen::MatrixXd::Identity(num_basis, num_basis);
  for (int k = 0; k < order; ++k) {
    const Eigen::Index rows = diff.rows() - 1;
    diff = (diff.bottomRows(rows) - diff.topRows(rows)).eval();
  }
  return diff.transpose() * diff;
}

PenaltyDecomposition decompose_penalty(const Eigen::MatrixXd& penalty,
                                       int order) {
  const Eigen::Index k = penalty.rows();
  if (penalty.cols() != k || k == 0) {
    throw std::invalid_argument("penalty matrix must be square and nonempty");
  }
  if (order < 0 || order >= k) {
    throw std::invalid_argument("penalty order out of range");
  }
  if ((penalty - penalty.transpose()).cwiseAbs().maxCoeff() >
      1e-10 * std::max(1.0, penalty.cwiseAbs().maxCoeff())) {
    throw std::invalid_argument("penalty matrix is not symmetric");
  }

  PenaltyDecomposition out;
  out.order = order;
  out.penalty = penalty;
  if (order == 0 && penalty.isIdentity(0.0)) {
    // any orthonormal basis diagonalizes I; keep the coordinate one
    out.q_pen = Eigen::MatrixXd::Identity(k, k);
    out.q_null = Eigen::MatrixXd(k, 0);
    out.lambda = Eigen::VectorXd::Ones(k);
    return out;
  }

  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(penalty);
  if (eig.info() != Eigen::Success) {
    throw std::runtime_error("penalty eigendecomposition failed");
  }
  // Eigen returns ascending order; reverse to descending.
  const Eigen::VectorXd values = eig.eigenvalues().reverse();
  Eigen::MatrixXd vectors = eig.eigenvectors().rowwise().reverse();

  const double threshold = 1e-8 * std::max(values(0), 0.0);
  Eigen::Index zeros = 0;
  for (Eigen::Index i = 0; i < k; ++i) {
    if (values(i) < -threshold) {
      throw std::invalid_argument("penalty matrix is not positive semidefinite");
    }
    if (values(i) <= threshold) ++zeros;
  }
  if (zeros != order) {
    throw std::runtime_error("penalty has " + std::to_string(zeros) +
                             " numerically zero eigenvalues, expected " +
                             std::to_string(order));
  }
  fix_signs(vectors);

  out.q_pen = vectors.leftCols(k - order);
  out.q_null = vectors.rightCols(order);
  out.lambda = values.head(k - order);
  return out;
}

}  // namespace gflm
