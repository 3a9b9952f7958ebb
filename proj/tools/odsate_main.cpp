// Case-control ATE estimation with outcome misclassification: CLI front end.

#include <iostream>
#include <string>
#include <utility>
#include <vector>

#include "CLI11.hpp"
#include "odsate/commands.hpp"
#include "odsate/errors.hpp"

namespace {

// Flag values are collected as (key, value) pairs and replayed onto the config
// in command-line order, after the config file, so flags always win.
struct Collected {
  std::vector<std::pair<std::string, std::string>> overrides;

  void add(CLI::App& app, const std::string& flag, const std::string& key,
           const std::string& help) {
    app.add_option_function<std::string>(
           flag, [this, key](const std::string& value) { overrides.emplace_back(key, value); },
           help)
        ->expected(1);
  }
};

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{
      "Average-treatment-effect estimation from case-control samples with "
      "misclassified binary outcomes"};
  app.get_formatter()->column_width(28);

  std::string config_path;
  app.add_option("--config", config_path, "flat key=value configuration file");

  Collected flags;
  flags.add(app, "--command", "command", "workflow: fit | simulate | sensitivity");
  flags.add(app, "--input", "input", "input CSV (fit/sensitivity)");
  flags.add(app, "--out", "out", "output directory (default .)");
  flags.add(app, "--seed", "seed", "RNG seed (default 1)");
  flags.add(app, "--jobs", "jobs", "worker count for replications/grid points");
  flags.add(app, "--engine", "engine", "estimator engine: glm | gam | both");
  flags.add(app, "--v", "v", "true outcome prevalence");
  flags.add(app, "--p01", "p01", "false positive rate P(Y*=1|Y=0)");
  flags.add(app, "--p10", "p10", "false negative rate P(Y*=0|Y=1)");
  flags.add(app, "--kn", "kn", "spline segments per smooth (default 10)");
  flags.add(app, "--degree", "degree", "B-spline degree (default 3)");
  flags.add(app, "--penalty-order", "penalty_order", "difference penalty order (default 2)");
  flags.add(app, "--lambda-grid", "lambda_grid", "comma list of smoothing candidates");
  flags.add(app, "--gamma", "gamma", "ridge weight (default 0.1)");
  flags.add(app, "--tol-score", "tol_score", "Newton sup-norm tolerance");
  flags.add(app, "--max-iter", "max_iter", "Newton iteration cap");
  flags.add(app, "--jacobian-mode", "jacobian_mode", "analytic | finite_difference");
  flags.add(app, "--model", "model", "simulation model: M1..M4");
  flags.add(app, "--n", "n", "case-control sample size (total)");
  flags.add(app, "--replications", "replications", "simulation replications");
  flags.add(app, "--pool-size", "pool_size", "population pool size");
  flags.add(app, "--methods", "methods",
            "comma list: glm_ee,gam_ee,naive1,naive2,naive3,iptw,oracle");
  flags.add(app, "--emit-dataset", "emit_dataset", "also write one sampled CSV here");
  flags.add(app, "--covariates", "covariates", "comma list of name:kind column declarations");
  flags.add(app, "--v-values", "v_values", "sensitivity grid for v (comma list)");
  flags.add(app, "--p10-values", "p10_values", "sensitivity grid for p10 (comma list)");
  flags.add(app, "--p01-values", "p01_values", "sensitivity grid for p01 (comma list)");
  flags.add(app, "--true-tau-draws", "true_tau_draws", "Monte Carlo draws for the true ATE");

  CLI11_PARSE(app, argc, argv);

  try {
    odsate::RunConfig config;
    if (!config_path.empty()) config = odsate::parse_config_file(config_path);
    for (const auto& [key, value] : flags.overrides) {
      odsate::apply_override(config, key, value);
    }
    if (config.command.empty()) {
      std::cerr << "input error: no command given (use --command or a config file)\n";
      return 2;
    }
    return odsate::run_command(config);
  } catch (const odsate::ParseError& e) {
    std::cerr << "input error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "internal error: " << e.what() << "\n";
    return 4;
  }
}
