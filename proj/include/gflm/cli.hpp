#pragma once

// Command-line front end. Subcommands:
//   test      curves.csv responses.csv -> JSON test result
//   fpca      curves.csv                -> JSON FPCA summary
//   simulate  config.txt                -> results.csv, results.json, summary
//   generate  config.txt                -> one simulated curves/responses pair
//
// Exit codes: 0 success, 1 error, 2 result produced but PQL did not converge.

#include "gflm/harness.hpp"

#include <filesystem>
#include <iosfwd>
#include <string>
#include <vector>

namespace gflm {

inline constexpr int kExitOk = 0;
inline constexpr int kExitError = 1;
inline constexpr int kExitNonconverged = 2;

/// Simulation settings read from a key = value file.
struct SimulationPlan {
  SimConfig base;
  std::vector<int> sizes;          // n values; defaults to {base.n}
  std::vector<double> deltas;      // defaults to {base.delta}
  std::vector<Hypothesis> hypotheses{Hypothesis::nullity,
                                     Hypothesis::functionality,
                                     Hypothesis::linearity};
  std::vector<TestMethod> methods{TestMethod::arlrt};
};

/// Parses `key = value` lines; `#` starts a comment. Errors name the file
/// and line.
SimulationPlan parse_simulation_config(std::istream& in,
                                       const std::string& source);
SimulationPlan read_simulation_config(const std::filesystem::path& path);

int run_cli(int argc, const char* const* argv, std::ostream& out,
            std::ostream& err);

}  // namespace gflm
