#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "odsate/dataset.hpp"
#include "odsate/gam.hpp"
#include "odsate/link.hpp"
#include "odsate/simulate.hpp"
#include "odsate/solver.hpp"

namespace odsate {

struct SensitivityGrid {
  std::vector<double> v_values;
  std::vector<double> p10_values;
  std::vector<double> p01_values;
  // Non-empty axes; every (v, p10, p01) triple must form a valid MismeasureSpec.
  void validate() const;
};

struct RunConfig {
  std::string command;  // fit | simulate | sensitivity
  std::string input_path;
  MismeasureSpec spec{std::numeric_limits<double>::quiet_NaN(), 0.0, 0.0};
  SensitivityGrid grid;
  std::string engine = "glm";  // glm | gam | both
  SplineConfig spline;
  bool lambda_grid_set = false;  // true once the user supplied lambda_grid
  SolveOptions solver;
  std::string output_dir = ".";
  std::uint64_t seed = 1;
  int jobs = 1;
  ScenarioSpec scenario;
  std::vector<std::string> methods;  // empty: the full standard battery
  std::string emit_dataset;          // optional path for one sampled CSV
  DatasetSchema schema;              // covariate declarations for load_dataset
  long true_tau_draws = kDefaultTrueTauDraws;
};

// Flat key=value configuration (one pair per line, '#' comments); keys match
// the CLI flag names. Unknown keys raise ParseError.
RunConfig parse_config_file(const std::string& path);
void apply_override(RunConfig& config, const std::string& key, const std::string& value);

// Workflow entry points; each writes results.json (plus command-specific CSV)
// under config.output_dir and prints a short summary to stdout. Return values
// follow the exit-code contract (0 success, 3 numerical failure).
int cmd_fit(const RunConfig& config);
int cmd_simulate(const RunConfig& config);
int cmd_sensitivity(const RunConfig& config);

// Dispatch plus exit-code mapping: 0 success, 2 input error, 3 numerical
// failure, 4 internal error.
int run_command(const RunConfig& config);

}  // namespace odsate
