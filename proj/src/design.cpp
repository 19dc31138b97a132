#include "gflm/design.hpp"

#include "gflm/quadrature.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>
#include <vector>

namespace gflm {

std::string_view to_string(Hypothesis h) {
  switch (h) {
    case Hypothesis::nullity: return "nullity";
    case Hypothesis::functionality: return "functionality";
    case Hypothesis::linearity: return "linearity";
  }
  return "unknown";
}

Hypothesis parse_hypothesis(std::string_view name) {
  if (name == "nullity") return Hypothesis::nullity;
  if (name == "functionality") return Hypothesis::functionality;
  if (name == "linearity") return Hypothesis::linearity;
  throw std::invalid_argument("unknown hypothesis '" + std::string(name) +
                              "'");
}

namespace {

void require_matching_domain(const SplineBasis& basis,
                             const Eigen::VectorXd& grid) {
  require_increasing_grid(grid);
  const double span = basis.domain_hi() - basis.domain_lo();
  if (std::abs(grid(0) - basis.domain_lo()) > 1e-9 * span ||
      std::abs(grid(grid.size() - 1) - basis.domain_hi()) > 1e-9 * span) {
    throw std::invalid_argument("grid endpoints do not match the spline "
                                "domain");
  }
}

// Three-point Gauss-Legendre on [a, b]; exact for the degree <= 5 integrands
// that arise between consecutive breakpoints.
Eigen::MatrixXd exact_linear_J(const Eigen::MatrixXd& psi,
                               const SplineBasis& basis,
                               const Eigen::VectorXd& grid) {
  std::vector<double> breaks(grid.data(), grid.data() + grid.size());
  for (double k : basis.knots()) {
    if (k > basis.domain_lo() && k < basis.domain_hi()) breaks.push_back(k);
  }
  std::sort(breaks.begin(), breaks.end());
  breaks.erase(std::unique(breaks.begin(), breaks.end(),
                           [&](double a, double b) {
                             return std::abs(a - b) <=
                                    1e-14 * (basis.domain_hi() -
                                             basis.domain_lo());
                           }),
               breaks.end());
  const double nodes[3] = {-std::sqrt(0.6), 0.0, std::sqrt(0.6)};
  const double weights[3] = {5.0 / 9.0, 8.0 / 9.0, 5.0 / 9.0};
  Eigen::MatrixXd J = Eigen::MatrixXd::Zero(psi.cols(), basis.num_basis());
  Eigen::VectorXd psi_t(psi.cols());
  for (std::size_t s = 0; s + 1 < breaks.size(); ++s) {
    const double a = breaks[s];
    const double b = breaks[s + 1];
    for (int q = 0; q < 3; ++q) {
      const double t = 0.5 * (a + b) + 0.5 * (b - a) * nodes[q];
      const double wq = 0.5 * (b - a) * weights[q];
      for (Eigen::Index k = 0; k < psi.cols(); ++k) {
        psi_t(k) = interpolate_linear(grid, psi.col(k), t);
      }
      J.noalias() += wq * psi_t * basis.evaluate(t).transpose();
    }
  }
  return J;
}

}  // namespace

Eigen::MatrixXd compute_J(const Eigen::MatrixXd& psi, const SplineBasis& basis,
                          const Eigen::VectorXd& grid, JQuadrature rule) {
  if (psi.rows() != grid.size()) {
    throw std::invalid_argument("eigenfunction rows do not match the grid");
  }
  require_matching_domain(basis, grid);
  if (rule == JQuadrature::piecewise_linear) {
    return exact_linear_J(psi, basis, grid);
  }
  const Eigen::VectorXd w = trapezoid_weights(grid);
  return psi.transpose() * w.asDiagonal() * evaluate_basis(basis, grid);
}

GlmmDesign build_design(const Eigen::MatrixXd& scores, const Eigen::MatrixXd& J,
                        const PenaltyDecomposition& pen,
                        Hypothesis hypothesis) {
  if (scores.cols() != J.rows()) {
    throw std::invalid_argument("score columns (" +
                                std::to_string(scores.cols()) +
                                ") do not match J rows (" +
                                std::to_string(J.rows()) + ")");
  }
  if (J.cols() != pen.num_basis()) {
    throw std::invalid_argument("J columns do not match the penalty size");
  }
  if (pen.order != penalty_order(hypothesis)) {
    throw std::invalid_argument("penalty order does not match the hypothesis");
  }
  const Eigen::Index n = scores.rows();
  const Eigen::MatrixXd xj = scores * J;
  GlmmDesign out;
  out.hypothesis = hypothesis;
  out.order = pen.order;
  out.J = J;
  out.fixed.resize(n, 1 + pen.order);
  out.fixed.col(0).setOnes();
  if (pen.order > 0) out.fixed.rightCols(pen.order) = xj * pen.q_null;
  out.random = xj * pen.q_pen *
               pen.lambda.cwiseSqrt().cwiseInverse().asDiagonal();
  return out;
}

Eigen::VectorXd coefficient_from_effects(const PenaltyDecomposition& pen,
                                         const SplineBasis& basis,
                                         const Eigen::VectorXd& grid,
                                         const Eigen::VectorXd& beta_star,
                                         const Eigen::VectorXd& u_star) {
  if (beta_star.size() != pen.q_null.cols() ||
      u_star.size() != pen.q_pen.cols()) {
    throw std::invalid_argument("effect vectors do not match the penalty "
                                "decomposition");
  }
  if (basis.num_basis() != pen.num_basis()) {
    throw std::invalid_argument("basis size does not match the penalty");
  }
  Eigen::VectorXd g = pen.q_pen * u_star;
  if (beta_star.size() > 0) g += pen.q_null * beta_star;
  return evaluate_basis(basis, grid) * g;
}

Eigen::VectorXd penalized_effects(const PenaltyDecomposition& pen,
                                  const Eigen::VectorXd& u) {
  if (u.size() != pen.lambda.size()) {
    throw std::invalid_argument("random effect length does not match the "
                                "penalty");
  }
  return u.cwiseQuotient(pen.lambda.cwiseSqrt());
}

}  // namespace gflm
