#pragma once

// Synthetic scalar-on-function data and Monte Carlo estimates of rejection
// rates for the variance-component tests.

#include "gflm/data.hpp"
#include "gflm/design.hpp"
#include "gflm/vctest.hpp"

#include <Eigen/Dense>

#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

namespace gflm {

enum class CoefficientForm {
  scalar,     // delta
  linear,     // 1 + delta t
  trig,       // 1 + t + delta cos(2 pi t)
  tabulated,  // delta * beta_tab(t)
};

std::string_view to_string(CoefficientForm form);
CoefficientForm parse_coefficient(std::string_view name);

struct SimConfig {
  FamilyTag family = FamilyTag::bernoulli;
  int trials = 10;                  // binomial only
  double gaussian_sd = 1.0;         // response noise for gaussian
  CoefficientForm coefficient = CoefficientForm::scalar;
  double delta = 0.0;
  Eigen::VectorXd tabulated;        // beta on the grid, tabulated form only
  int n = 100;
  int m = 80;                       // observed points per subject
  int grid_size = 80;
  double intercept = 0.0;
  double noise_var = 0.05;          // sigma^2_X
  Eigen::VectorXd eigenvalues = (Eigen::VectorXd(5) << 1.0, 0.5, 0.25, 0.125,
                                 0.0625).finished();
  double alpha_level = 0.05;
  int replicates = 100;
  int null_draws = 2000;
  std::uint64_t seed = 1;
  int threads = 1;
  TestOptions test;                 // K_u, PQL and FPCA settings

  /// Throws std::invalid_argument naming the offending field.
  void validate() const;
};

/// Orthonormal Fourier functions {1, sqrt2 sin 2 pi t, sqrt2 cos 2 pi t,
/// sqrt2 sin 4 pi t, ...} on [0, 1].
Eigen::MatrixXd fourier_eigenfunctions(const Eigen::VectorXd& grid, int count);

Eigen::VectorXd equally_spaced_grid(int size);

Eigen::VectorXd coefficient_values(const SimConfig& config,
                                   const Eigen::VectorXd& grid);

struct SimulatedData {
  FunctionalDataset data;
  Eigen::MatrixXd latent;   // n x grid_size noise-free curves
  Eigen::VectorXd eta;      // linear predictor from the latent curves
};

SimulatedData generate_dataset(const SimConfig& config, std::uint64_t seed);

struct ExperimentResult {
  FamilyTag family = FamilyTag::bernoulli;
  Hypothesis hypothesis = Hypothesis::nullity;
  TestMethod method = TestMethod::arlrt;
  int n = 0;
  int m = 0;
  CoefficientForm coefficient = CoefficientForm::scalar;
  double delta = 0.0;
  int replicates = 0;
  int rejections = 0;              // converged replicates that rejected
  int nonconverged = 0;
  int failures = 0;                // replicates that threw
  int rejections_nonconverged = 0; // rejections among non-converged fits
  double mean_runtime = 0.0;       // seconds per replicate and test

  /// Headline rate: non-converged and failed replicates count as
  /// non-rejections.
  double rate() const noexcept;
  double standard_error() const noexcept;
  /// Rate among converged, non-failed replicates only.
  double rate_converged() const noexcept;
};

/// Runs every (hypothesis, method) pair on the same simulated datasets; one
/// FPCA fit per replicate is shared by all tests.
std::vector<ExperimentResult> run_experiments(
    const SimConfig& config, const std::vector<Hypothesis>& hypotheses,
    const std::vector<TestMethod>& methods);

ExperimentResult run_experiment(const SimConfig& config, TestMethod method,
                                Hypothesis hypothesis);

/// One experiment per delta at the configured n and at 2n, using
/// beta(t) = delta * tabulated(t).
std::vector<ExperimentResult> power_mode(
    const SimConfig& config, const std::vector<double>& deltas,
    const std::vector<Hypothesis>& hypotheses,
    const std::vector<TestMethod>& methods);

}  // namespace gflm
