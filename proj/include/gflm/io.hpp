#pragma once

// CSV data files and JSON/CSV result serialization.
//
// Curves:    long format, header `id,t,x`, one row per observation.
// Responses: header `id,y` or `id,y,trials`, one row per subject.

#include "gflm/data.hpp"
#include "gflm/fpca.hpp"
#include "gflm/harness.hpp"
#include "gflm/vctest.hpp"

#include <json.hpp>

#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

namespace gflm {

inline constexpr const char* kToolName = "gflmtest";
inline constexpr const char* kToolVersion = "0.1.0";

struct CurveRow {
  std::string id;
  double t = 0.0;
  double x = 0.0;
};

struct ResponseRow {
  std::string id;
  double y = 0.0;
  std::optional<double> trials;
};

std::vector<CurveRow> read_curves_csv(const std::filesystem::path& path);
std::vector<ResponseRow> read_responses_csv(const std::filesystem::path& path);

/// Subjects appear in order of first appearance in `curves`; the common
/// grid is the sorted set of distinct t values. Every curve id needs exactly
/// one response and vice versa.
FunctionalDataset assemble_dataset(const std::vector<CurveRow>& curves,
                                   const std::vector<ResponseRow>& responses,
                                   FamilyTag family);

/// Dataset with placeholder gaussian responses, for FPCA-only use.
FunctionalDataset curves_only_dataset(const std::vector<CurveRow>& curves);

void write_curves_csv(const FunctionalDataset& data, std::ostream& out);
void write_responses_csv(const FunctionalDataset& data, std::ostream& out);

/// Shortest decimal text that parses back to the same double.
std::string format_double(double v);

nlohmann::ordered_json test_result_json(const TestResult& result);
nlohmann::ordered_json fpca_json(const FpcaModel& model,
                                 const std::vector<double>& aic);
nlohmann::ordered_json experiment_json(const ExperimentResult& result);

void write_experiment_csv(const std::vector<ExperimentResult>& results,
                          std::ostream& out);

/// Fixed-width text table, one line per data cell, one column per
/// (hypothesis, method).
void write_experiment_summary(const std::vector<ExperimentResult>& results,
                              std::ostream& out);

}  // namespace gflm
