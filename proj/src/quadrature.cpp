#include "gflm/quadrature.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace gflm {

void require_increasing_grid(const Eigen::VectorXd& grid) {
  if (grid.size() < 2) {
    throw std::invalid_argument("grid needs at least two points");
  }
  for (Eigen::Index i = 0; i < grid.size(); ++i) {
    if (!std::isfinite(grid(i))) {
      throw std::invalid_argument("grid contains a non-finite value");
    }
    if (i > 0 && !(grid(i) > grid(i - 1))) {
      throw std::invalid_argument("grid must be strictly increasing");
    }
  }
}

Eigen::VectorXd trapezoid_weights(const Eigen::VectorXd& grid) {
  require_increasing_grid(grid);
  const Eigen::Index m = grid.size();
  Eigen::VectorXd w = Eigen::VectorXd::Zero(m);
  for (Eigen::Index j = 0; j + 1 < m; ++j) {
    const double half = 0.5 * (grid(j + 1) - grid(j));
    w(j) += half;
    w(j + 1) += half;
  }
  return w;
}

double interpolate_linear(const Eigen::VectorXd& grid,
                          const Eigen::VectorXd& values, double t) {
  const Eigen::Index m = grid.size();
  if (t <= grid(0)) return values(0);
  if (t >= grid(m - 1)) return values(m - 1);
  const double* begin = grid.data();
  const auto hi = std::upper_bound(begin, begin + m, t) - begin;
  const auto lo = hi - 1;
  const double frac = (t - grid(lo)) / (grid(hi) - grid(lo));
  return (1.0 - frac) * values(lo) + frac * values(hi);
}

}  // namespace gflm
