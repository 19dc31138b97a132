#include "gflm/data.hpp"

#include "gflm/quadrature.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>

namespace gflm {

std::string_view to_string(FamilyTag tag) {
  switch (tag) {
    case FamilyTag::gaussian: return "gaussian";
    case FamilyTag::bernoulli: return "bernoulli";
    case FamilyTag::binomial: return "binomial";
    case FamilyTag::poisson: return "poisson";
  }
  return "unknown";
}

FamilyTag parse_family(std::string_view name) {
  if (name == "gaussian" || name == "normal") return FamilyTag::gaussian;
  if (name == "bernoulli" || name == "binary") return FamilyTag::bernoulli;
  if (name == "binomial") return FamilyTag::binomial;
  if (name == "poisson") return FamilyTag::poisson;
  throw std::invalid_argument("unknown family '" + std::string(name) + "'");
}

std::size_t FunctionalDataset::total_observations() const noexcept {
  return std::accumulate(subjects.begin(), subjects.end(), std::size_t{0},
                         [](std::size_t acc, const SubjectCurve& s) {
                           return acc + s.size();
                         });
}

void FunctionalDataset::validate() const {
  require_increasing_grid(grid);
  const std::size_t n = subjects.size();
  if (n == 0) throw std::invalid_argument("dataset has no subjects");
  if (static_cast<std::size_t>(response.size()) != n) {
    throw std::invalid_argument("response count does not match subject count");
  }
  for (const auto& s : subjects) {
    if (s.index.empty()) {
      throw std::invalid_argument("subject '" + s.id + "' has no observations");
    }
    if (static_cast<std::size_t>(s.values.size()) != s.index.size()) {
      throw std::invalid_argument("subject '" + s.id +
                                  "': grid and value lengths differ");
    }
    for (std::size_t j = 0; j < s.index.size(); ++j) {
      if (s.index[j] >= grid_size()) {
        throw std::invalid_argument("subject '" + s.id +
                                    "' references a point outside the grid");
      }
      if (j > 0 && s.index[j] <= s.index[j - 1]) {
        throw std::invalid_argument("subject '" + s.id +
                                    "' has unsorted or repeated grid points");
      }
      if (!std::isfinite(s.values(static_cast<Eigen::Index>(j)))) {
        throw std::invalid_argument("subject '" + s.id +
                                    "' has a non-finite value");
      }
    }
  }
  if (family == FamilyTag::binomial &&
      static_cast<std::size_t>(trials.size()) != n) {
    throw std::invalid_argument("binomial responses need one trial count per "
                                "subject");
  }
  for (std::size_t i = 0; i < n; ++i) {
    const double y = response(static_cast<Eigen::Index>(i));
    const std::string& id = subjects[i].id;
    if (!std::isfinite(y)) {
      throw std::invalid_argument("response for '" + id + "' is not finite");
    }
    switch (family) {
      case FamilyTag::gaussian:
        break;
      case FamilyTag::bernoulli:
        if (y != 0.0 && y != 1.0) {
          throw std::invalid_argument("bernoulli response for '" + id +
                                      "' must be 0 or 1");
        }
        break;
      case FamilyTag::binomial: {
        const double m = trials(static_cast<Eigen::Index>(i));
        if (!(m >= 1.0) || m != std::floor(m)) {
          throw std::invalid_argument("binomial trials for '" + id +
                                      "' must be a positive integer");
        }
        if (y < 0.0 || y > m || y != std::floor(y)) {
          throw std::invalid_argument("binomial response for '" + id +
                                      "' must be an integer in [0, trials]");
        }
        break;
      }
      case FamilyTag::poisson:
        if (y < 0.0 || y != std::floor(y)) {
          throw std::invalid_argument("poisson response for '" + id +
                                      "' must be a nonnegative integer");
        }
        break;
    }
  }
}

SubjectCurve make_subject(std::string id, const Eigen::VectorXd& grid,
                          const std::vector<double>& t,
                          const std::vector<double>& x) {
  if (t.size() != x.size()) {
    throw std::invalid_argument("subject '" + id +
                                "': t and x lengths differ");
  }
  const double tol = 1e-9 * (grid(grid.size() - 1) - grid(0));
  std::vector<std::pair<std::size_t, double>> points;
  points.reserve(t.size());
  for (std::size_t j = 0; j < t.size(); ++j) {
    const double* begin = grid.data();
    const double* end = begin + grid.size();
    const double* it = std::lower_bound(begin, end, t[j] - tol);
    if (it == end || std::abs(*it - t[j]) > tol) {
      throw std::invalid_argument("subject '" + id + "': t = " +
                                  std::to_string(t[j]) +
                                  " is not on the common grid");
    }
    points.emplace_back(static_cast<std::size_t>(it - begin), x[j]);
  }
  std::sort(points.begin(), points.end());
  SubjectCurve out;
  out.id = std::move(id);
  out.values.resize(static_cast<Eigen::Index>(points.size()));
  for (std::size_t j = 0; j < points.size(); ++j) {
    if (j > 0 && points[j].first == points[j - 1].first) {
      throw std::invalid_argument("subject '" + out.id +
                                  "' has duplicate t values");
    }
    out.index.push_back(points[j].first);
    out.values(static_cast<Eigen::Index>(j)) = points[j].second;
  }
  return out;
}

}  // namespace gflm
