#pragma once

// Variance-component tests of sigma^2_u = 0 on the PQL working model: the
// restricted likelihood ratio test with its finite-sample spectral null
// distribution, and a Satterthwaite-scaled score test.

#include "gflm/data.hpp"
#include "gflm/design.hpp"
#include "gflm/fpca.hpp"
#include "gflm/glmm_pql.hpp"

#include <Eigen/Dense>

#include <cstdint>
#include <optional>
#include <string_view>
#include <vector>

namespace gflm {

enum class TestMethod { arlrt, ascore };

std::string_view to_string(TestMethod m);
TestMethod parse_method(std::string_view name);

struct TestOptions {
  TestMethod method = TestMethod::arlrt;
  int null_draws = 10000;
  int num_basis = 30;                 // K_u
  int degree = 3;
  std::optional<int> num_components;  // force K_x instead of AIC
  int max_components = 20;            // AIC scan bound
  std::uint64_t seed = 20200101;
  bool refit_null = false;            // REL(0) from a separate null PQL fit
  int threads = 1;                    // null simulation threads
  JQuadrature j_rule = JQuadrature::trapezoid;
  FpcaOptions fpca;
  PqlOptions pql;
};

struct TestResult {
  Hypothesis hypothesis = Hypothesis::nullity;
  TestMethod method = TestMethod::arlrt;
  double statistic = 0.0;
  double p_value = 1.0;
  int null_draws = 0;
  double mass_at_zero = 1.0;         // RLRT only
  // reference a * chi^2_b for the score test
  double score_scale = 0.0;
  double score_df = 0.0;
  // diagnostics
  int num_components = 0;            // K_x
  int num_basis = 0;                 // K_u
  int num_spectral = 0;              // positive eigenvalues of Z~^T P0 Z~
  double lambda_hat = 0.0;
  double sigma2_u = 0.0;
  double sigma2_e = 0.0;
  bool converged = false;
  bool diverged = false;
  int iterations = 0;
  bool null_converged = true;        // set when a null fit was run
  double noise_var = 0.0;            // sigma^2_X from the FPCA step
  Eigen::VectorXd grid;
  Eigen::VectorXd coefficient;       // beta-hat(t) on the grid
};

/// 2 (REL(lambda-hat) - REL(0)) on the converged working model, floored at 0.
double rlrt_statistic(const PqlFit& fit);

/// Spectral draws of sup_lambda [(n-p) log(1 + N/D) - sum_s log(1 + lambda
/// mu_s)]; deterministic for a given seed regardless of `threads`.
std::vector<double> simulate_rlrt_null(const Eigen::VectorXd& mu, long n,
                                       long p, int n_draws, std::uint64_t seed,
                                       int threads = 1);

/// (1 + #{draws >= stat}) / (1 + #draws).
double rlrt_pvalue(double stat, const std::vector<double>& null_sample);

double zero_mass(const std::vector<double>& null_sample);

/// Score test from a null (lambda = 0) working model.
TestResult score_test_from_fit(const PqlFit& null_fit, Hypothesis hypothesis);

TestResult score_test(const GlmmDesign& design, const Eigen::VectorXd& y,
                      const Family& family, const Eigen::VectorXd& trials = {},
                      const PqlOptions& options = {});

/// Full pipeline: FPCA, K_x, penalty split, design, PQL, test.
TestResult run_test(const FunctionalDataset& data, Hypothesis hypothesis,
                    const TestOptions& options = {});

/// Same, reusing an FPCA fit (scores and K_x are recomputed per call).
TestResult run_test(const FunctionalDataset& data, const FpcaModel& fpca,
                    Hypothesis hypothesis, const TestOptions& options = {});

}  // namespace gflm
