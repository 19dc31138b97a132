#pragma once

#include <Eigen/Dense>

#include <cstddef>
#include <string>
#include <string_view>
#include <vector>

namespace gflm {

enum class FamilyTag { gaussian, bernoulli, binomial, poisson };

std::string_view to_string(FamilyTag tag);
FamilyTag parse_family(std::string_view name);

/// One subject's observed curve. `index` points into the dataset's common
/// grid; `values` holds X_i at those points.
struct SubjectCurve {
  std::string id;
  std::vector<std::size_t> index;
  Eigen::VectorXd values;

  std::size_t size() const noexcept { return index.size(); }
};

struct FunctionalDataset {
  Eigen::VectorXd grid;               // common grid, strictly increasing
  std::vector<SubjectCurve> subjects;
  Eigen::VectorXd response;           // Y_i
  Eigen::VectorXd trials;             // binomial trial counts; empty otherwise
  FamilyTag family = FamilyTag::gaussian;

  std::size_t num_subjects() const noexcept { return subjects.size(); }
  std::size_t grid_size() const noexcept {
    return static_cast<std::size_t>(grid.size());
  }
  std::size_t total_observations() const noexcept;

  /// Checks grid nesting, per-subject shapes and family constraints on the
  /// responses. Throws std::invalid_argument with a description.
  void validate() const;
};

/// Builds a subject from explicit (t, x) pairs on `grid`. Each t must match a
/// grid point to within 1e-9 of the grid range.
SubjectCurve make_subject(std::string id, const Eigen::VectorXd& grid,
                          const std::vector<double>& t,
                          const std::vector<double>& x);

}  // namespace gflm
