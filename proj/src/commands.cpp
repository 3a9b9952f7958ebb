#include "odsate/commands.hpp"

#include <algorithm>
#include <atomic>
#include <cerrno>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>
#include <thread>

#include "json.hpp"
#include "odsate/errors.hpp"
#include "odsate/rng.hpp"

namespace odsate {

namespace {

using nlohmann::json;

std::string trim_copy(const std::string& s) {
  const auto first = s.find_first_not_of(" \t\r\n");
  if (first == std::string::npos) return "";
  const auto last = s.find_last_not_of(" \t\r\n");
  return s.substr(first, last - first + 1);
}

std::vector<std::string> split_list(const std::string& s) {
  std::vector<std::string> out;
  std::string item;
  std::istringstream stream(s);
  while (std::getline(stream, item, ',')) {
    item = trim_copy(item);
    if (!item.empty()) out.push_back(item);
  }
  return out;
}

double parse_double(const std::string& key, const std::string& value) {
  errno = 0;
  char* end = nullptr;
  const double x = std::strtod(value.c_str(), &end);
  if (end == value.c_str() || *end != '\0' || errno == ERANGE || !std::isfinite(x)) {
    throw ParseError("key '" + key + "': '" + value + "' is not a finite real");
  }
  return x;
}

long parse_long(const std::string& key, const std::string& value) {
  errno = 0;
  char* end = nullptr;
  const long x = std::strtol(value.c_str(), &end, 10);
  if (end == value.c_str() || *end != '\0' || errno == ERANGE) {
    throw ParseError("key '" + key + "': '" + value + "' is not an integer");
  }
  return x;
}

std::vector<double> parse_double_list(const std::string& key, const std::string& value) {
  std::vector<double> out;
  for (const std::string& item : split_list(value)) out.push_back(parse_double(key, item));
  if (out.empty()) throw ParseError("key '" + key + "': empty list");
  return out;
}

// %.12g keeps CSV output byte-stable across runs; non-finite prints empty.
std::string fmt_num(double x) {
  if (!std::isfinite(x)) return "";
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.12g", x);
  return buf;
}

void write_text_file(const std::filesystem::path& path, const std::string& content) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot open '" + path.string() + "' for writing");
  out << content;
  if (!out) throw Error("failed writing '" + path.string() + "'");
}

void parallel_for(int count, int jobs, const std::function<void(int)>& body) {
  std::atomic<int> next{0};
  const auto worker = [&]() {
    for (;;) {
      const int i = next.fetch_add(1);
      if (i >= count) return;
      body(i);
    }
  };
  const int n_workers = std::max(1, std::min(jobs, count));
  if (n_workers == 1) {
    worker();
    return;
  }
  std::vector<std::thread> threads;
  threads.reserve(n_workers);
  for (int k = 0; k < n_workers; ++k) threads.emplace_back(worker);
  for (auto& th : threads) th.join();
}

std::vector<Engine> expand_engines(const std::string& engine) {
  if (engine == "glm") return {Engine::glm};
  if (engine == "gam") return {Engine::gam};
  if (engine == "both") return {Engine::glm, Engine::gam};
  throw ParseError("engine must be glm, gam, or both (got '" + engine + "')");
}

std::string engine_name(Engine e) { return e == Engine::glm ? "glm" : "gam"; }

json spec_json(const MismeasureSpec& spec) {
  return {{"v", spec.v}, {"p01", spec.p01}, {"p10", spec.p10}, {"v_star", spec.v_star()}};
}

json fit_json(Engine engine, const FitResult& fit) {
  json theta;
  theta["s"] = fit.theta.s;
  theta["beta"] = std::vector<double>(fit.theta.beta.data(),
                                      fit.theta.beta.data() + fit.theta.beta.size());
  theta["u"] = {fit.theta.u[0], fit.theta.u[1], fit.theta.u[2], fit.theta.u[3]};
  json b;
  b["engine"] = engine_name(engine);
  b["converged"] = true;
  b["theta_hat"] = theta;
  b["tau_hat"] = fit.tau_hat;
  b["tau_se"] = fit.tau_se;
  b["tau_ci95"] = {fit.tau_ci95.first, fit.tau_ci95.second};
  b["s_hat"] = fit.theta.s;
  b["v_star"] = fit.v_star;
  if (std::isfinite(fit.lambda_selected)) {
    b["lambda_selected"] = fit.lambda_selected;
  } else {
    b["lambda_selected"] = nullptr;
  }
  b["bic_trace"] = fit.bic_trace;
  b["diagnostics"] = {{"converged", fit.diagnostics.converged},
                      {"iterations", fit.diagnostics.iterations},
                      {"final_score_norm", fit.diagnostics.final_score_norm},
                      {"halvings_used", fit.diagnostics.halvings_used}};
  b["sandwich"] = {{"condition_estimate", fit.sandwich_info.condition_estimate},
                   {"ridged", fit.sandwich_info.ridged}};
  b["error"] = nullptr;
  return b;
}

json failure_json(Engine engine, const std::string& message) {
  json b;
  b["engine"] = engine_name(engine);
  b["converged"] = false;
  b["error"] = message;
  return b;
}

void write_report(const RunConfig& config, const json& report) {
  std::filesystem::create_directories(config.output_dir);
  write_text_file(std::filesystem::path(config.output_dir) / "results.json",
                  report.dump(2) + "\n");
}

CovariateKind parse_kind(const std::string& text) {
  if (text == "continuous") return CovariateKind::continuous;
  if (text == "discrete") return CovariateKind::discrete;
  throw ParseError("covariate kind must be continuous or discrete (got '" + text + "')");
}

}  // namespace

void SensitivityGrid::validate() const {
  if (v_values.empty() || p10_values.empty() || p01_values.empty()) {
    throw DomainError("non-empty sensitivity grid",
                      "v_values, p10_values, and p01_values must all be provided");
  }
  for (double v : v_values) {
    for (double p10 : p10_values) {
      for (double p01 : p01_values) {
        MismeasureSpec{v, p01, p10}.validate();
      }
    }
  }
}

RunConfig parse_config_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ParseError("cannot open config file '" + path + "'");
  RunConfig config;
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line.erase(hash);
    line = trim_copy(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) {
      throw ParseError("config line " + std::to_string(line_no) +
                       ": expected key=value, got '" + line + "'");
    }
    apply_override(config, trim_copy(line.substr(0, eq)), trim_copy(line.substr(eq + 1)));
  }
  return config;
}

void apply_override(RunConfig& config, const std::string& key, const std::string& value) {
  if (key == "command") {
    if (value != "fit" && value != "simulate" && value != "sensitivity") {
      throw ParseError("command must be fit, simulate, or sensitivity (got '" + value + "')");
    }
    config.command = value;
  } else if (key == "input") {
    config.input_path = value;
  } else if (key == "out" || key == "output_dir") {
    config.output_dir = value;
  } else if (key == "seed") {
    config.seed = static_cast<std::uint64_t>(parse_long(key, value));
    config.scenario.seed = config.seed;
  } else if (key == "jobs") {
    const long jobs = parse_long(key, value);
    if (jobs < 1) throw ParseError("jobs must be >= 1");
    config.jobs = static_cast<int>(jobs);
  } else if (key == "engine") {
    expand_engines(value);  // validates
    config.engine = value;
  } else if (key == "v") {
    config.spec.v = parse_double(key, value);
    config.scenario.v = config.spec.v;
  } else if (key == "p01") {
    config.spec.p01 = parse_double(key, value);
    config.scenario.p01 = config.spec.p01;
  } else if (key == "p10") {
    config.spec.p10 = parse_double(key, value);
    config.scenario.p10 = config.spec.p10;
  } else if (key == "kn") {
    config.spline.knots_Kn = static_cast<int>(parse_long(key, value));
  } else if (key == "degree") {
    config.spline.degree_p = static_cast<int>(parse_long(key, value));
  } else if (key == "penalty_order") {
    config.spline.penalty_order_m = static_cast<int>(parse_long(key, value));
  } else if (key == "lambda_grid") {
    config.spline.lambda_grid = parse_double_list(key, value);
    config.lambda_grid_set = true;
  } else if (key == "gamma") {
    config.spline.gamma = parse_double(key, value);
  } else if (key == "tol_score") {
    config.solver.tol_score = parse_double(key, value);
  } else if (key == "max_iter") {
    config.solver.max_iter = static_cast<int>(parse_long(key, value));
  } else if (key == "step_halving_max") {
    config.solver.step_halving_max = static_cast<int>(parse_long(key, value));
  } else if (key == "jacobian_mode") {
    if (value == "analytic") {
      config.solver.jacobian_mode = SolveOptions::JacobianMode::analytic;
    } else if (value == "finite_difference") {
      config.solver.jacobian_mode = SolveOptions::JacobianMode::finite_difference;
    } else {
      throw ParseError("jacobian_mode must be analytic or finite_difference");
    }
  } else if (key == "model") {
    config.scenario.model_id = parse_model_id(value);
  } else if (key == "n") {
    config.scenario.n_sample = parse_long(key, value);
  } else if (key == "replications") {
    config.scenario.replications = static_cast<int>(parse_long(key, value));
  } else if (key == "pool_size") {
    config.scenario.pool_size = parse_long(key, value);
  } else if (key == "methods") {
    config.methods = split_list(value);
  } else if (key == "emit_dataset") {
    config.emit_dataset = value;
  } else if (key == "covariates") {
    config.schema.covariates.clear();
    for (const std::string& item : split_list(value)) {
      const auto colon = item.find(':');
      if (colon == std::string::npos) {
        throw ParseError("covariates entries must be name:kind (got '" + item + "')");
      }
      config.schema.covariates.emplace_back(trim_copy(item.substr(0, colon)),
                                            parse_kind(trim_copy(item.substr(colon + 1))));
    }
  } else if (key == "v_values") {
    config.grid.v_values = parse_double_list(key, value);
  } else if (key == "p10_values") {
    config.grid.p10_values = parse_double_list(key, value);
  } else if (key == "p01_values") {
    config.grid.p01_values = parse_double_list(key, value);
  } else if (key == "true_tau_draws") {
    config.true_tau_draws = parse_long(key, value);
  } else {
    throw ParseError("unknown configuration key '" + key + "'");
  }
}

int cmd_fit(const RunConfig& config) {
  if (config.input_path.empty()) throw SchemaError("fit requires input=<csv path>");
  config.spec.validate();
  const ObservedSample sample = load_dataset(config.input_path, config.schema);

  json report;
  report["command"] = "fit";
  report["seed"] = config.seed;
  report["input"] = config.input_path;
  report["spec"] = spec_json(config.spec);
  json engines = json::array();
  bool any_failed = false;
  for (Engine engine : expand_engines(config.engine)) {
    json block;
    try {
      const FitResult fit = engine == Engine::glm
                                ? fit_glm_ee(sample, config.spec, config.solver)
                                : fit_gam_ee(sample, config.spec, config.spline, config.solver);
      block = fit_json(engine, fit);
      std::cout << "engine=" << engine_name(engine) << " tau_hat=" << fit.tau_hat
                << " se=" << fit.tau_se << " ci95=[" << fit.tau_ci95.first << ", "
                << fit.tau_ci95.second << "] s_hat=" << fit.theta.s << "\n";
    } catch (const NonConvergence& e) {
      any_failed = true;
      block = failure_json(engine, e.what());
      block["diagnostics"] = {{"converged", false},
                              {"iterations", e.iterations},
                              {"final_score_norm", e.final_score_norm}};
      block["last_iterate"] = e.last_iterate;
      std::cout << "engine=" << engine_name(engine) << " failed: " << e.what() << "\n";
    } catch (const RangeCollapse& e) {
      any_failed = true;
      block = failure_json(engine, e.what());
      block["clamp_fraction"] = e.clamp_fraction;
      std::cout << "engine=" << engine_name(engine) << " failed: " << e.what() << "\n";
    } catch (const SingularJacobian& e) {
      any_failed = true;
      block = failure_json(engine, e.what());
      std::cout << "engine=" << engine_name(engine) << " failed: " << e.what() << "\n";
    } catch (const IllConditioned& e) {
      any_failed = true;
      block = failure_json(engine, e.what());
      std::cout << "engine=" << engine_name(engine) << " failed: " << e.what() << "\n";
    } catch (const AllGridFailed& e) {
      any_failed = true;
      block = failure_json(engine, e.what());
      std::cout << "engine=" << engine_name(engine) << " failed: " << e.what() << "\n";
    }
    engines.push_back(block);
  }
  report["engines"] = engines;
  write_report(config, report);
  return any_failed ? 3 : 0;
}

namespace {

std::vector<Method> selected_methods(const RunConfig& config, const MismeasureSpec& spec,
                                     double true_tau) {
  std::vector<Method> standard = standard_methods(spec, config.spline, config.solver);
  if (config.methods.empty()) return standard;
  std::vector<Method> picked;
  for (const std::string& name : config.methods) {
    if (name == "oracle") {
      // Constant true-tau method: exercises the degenerate metric path.
      picked.push_back({"oracle", [true_tau](const ObservedSample&) {
                          MethodResult r;
                          r.tau_hat = true_tau;
                          r.se = 0.0;
                          r.ci_lo = true_tau;
                          r.ci_hi = true_tau;
                          r.converged = true;
                          r.has_ci = true;
                          return r;
                        }});
      continue;
    }
    const auto it = std::find_if(standard.begin(), standard.end(),
                                 [&](const Method& m) { return m.name == name; });
    if (it == standard.end()) {
      throw ParseError("unknown method '" + name +
                       "' (expected glm_ee, gam_ee, naive1, naive2, naive3, iptw, oracle)");
    }
    picked.push_back(*it);
  }
  return picked;
}

json scenario_json(const ScenarioSpec& s) {
  return {{"model", model_id_name(s.model_id)}, {"v", s.v},
          {"p01", s.p01},                       {"p10", s.p10},
          {"n_sample", s.n_sample},             {"pool_size", s.pool_size},
          {"replications", s.replications}};
}

json metrics_json(const ScenarioMetrics& m) {
  return {{"method", m.method},
          {"rbias_pct", m.rbias_pct},
          {"rmse_x1000", m.rmse_x1000},
          {"coverage_pct", m.coverage_pct},
          {"mean_tau_hat", m.mean_tau_hat},
          {"true_tau", m.true_tau},
          {"n_converged", m.n_converged},
          {"n_total", m.n_total},
          {"empirical_var", m.empirical_var},
          {"median_model_var", m.median_model_var},
          {"aborted", m.aborted}};
}

std::string metrics_csv(const ScenarioSpec& scenario, const std::vector<ScenarioMetrics>& table) {
  std::ostringstream out;
  out << "method,model,n_sample,v,p01,p10,replications,true_tau,mean_tau_hat,"
         "rbias_pct,rmse_x1000,coverage_pct,n_converged,n_total,empirical_var,"
         "median_model_var,aborted\n";
  for (const ScenarioMetrics& m : table) {
    out << m.method << ',' << model_id_name(scenario.model_id) << ',' << scenario.n_sample
        << ',' << fmt_num(scenario.v) << ',' << fmt_num(scenario.p01) << ','
        << fmt_num(scenario.p10) << ',' << scenario.replications << ',' << fmt_num(m.true_tau)
        << ',' << fmt_num(m.mean_tau_hat) << ',' << fmt_num(m.rbias_pct) << ','
        << fmt_num(m.rmse_x1000) << ',' << fmt_num(m.coverage_pct) << ',' << m.n_converged
        << ',' << m.n_total << ',' << fmt_num(m.empirical_var) << ','
        << fmt_num(m.median_model_var) << ',' << (m.aborted ? 1 : 0) << '\n';
  }
  return out.str();
}

}  // namespace

int cmd_simulate(const RunConfig& config) {
  ScenarioSpec scenario = config.scenario;
  scenario.validate();
  const DataPool pool = generate_pool(scenario);
  const double true_tau =
      true_tau_mc(scenario.model_id, scenario.v, config.true_tau_draws, scenario.seed);
  const MismeasureSpec spec{scenario.v, scenario.p01, scenario.p10};
  const std::vector<Method> methods = selected_methods(config, spec, true_tau);
  const std::vector<ScenarioMetrics> table =
      run_replications(scenario, methods, config.jobs, true_tau, pool);

  if (!config.emit_dataset.empty()) {
    RngStream rng(scenario.seed, 1, Stage::fixture);
    save_dataset(config.emit_dataset,
                 case_control_sample(pool, scenario.n_sample / 2, scenario.n_sample / 2, rng));
  }

  std::filesystem::create_directories(config.output_dir);
  write_text_file(std::filesystem::path(config.output_dir) / "metrics.csv",
                  metrics_csv(scenario, table));

  json report;
  report["command"] = "simulate";
  report["seed"] = config.seed;
  report["scenario"] = scenario_json(scenario);
  report["true_tau"] = true_tau;
  json rows = json::array();
  for (const ScenarioMetrics& m : table) rows.push_back(metrics_json(m));
  report["metrics"] = rows;
  write_report(config, report);

  std::cout << "true_tau=" << true_tau << "\n";
  for (const ScenarioMetrics& m : table) {
    std::cout << m.method << ": rbias_pct=" << m.rbias_pct << " rmse_x1000=" << m.rmse_x1000
              << " coverage_pct=" << m.coverage_pct << " converged=" << m.n_converged << "/"
              << m.n_total << (m.aborted ? " ABORTED" : "") << "\n";
  }
  return 0;
}

int cmd_sensitivity(const RunConfig& config) {
  if (config.input_path.empty()) throw SchemaError("sensitivity requires input=<csv path>");
  config.grid.validate();
  const ObservedSample sample = load_dataset(config.input_path, config.schema);
  const std::vector<Engine> engines = expand_engines(config.engine);

  SplineConfig spline = config.spline;
  if (!config.lambda_grid_set) {
    // Integer candidate grid for data analysis (simulations use the log grid).
    spline.lambda_grid.clear();
    for (int k = 1; k <= 20; ++k) spline.lambda_grid.push_back(static_cast<double>(k));
  }

  struct Point {
    double v, p10, p01;
  };
  std::vector<Point> points;
  for (double v : config.grid.v_values) {
    for (double p10 : config.grid.p10_values) {
      for (double p01 : config.grid.p01_values) {
        points.push_back({v, p10, p01});
      }
    }
  }

  struct Row {
    Point point{};
    double v_star = std::numeric_limits<double>::quiet_NaN();
    std::string engine;
    double tau_hat = std::numeric_limits<double>::quiet_NaN();
    double ci_lo = std::numeric_limits<double>::quiet_NaN();
    double ci_hi = std::numeric_limits<double>::quiet_NaN();
    bool converged = false;
    std::string error;
  };
  const int n_rows = static_cast<int>(points.size() * engines.size());
  std::vector<Row> rows(n_rows);

  parallel_for(n_rows, config.jobs, [&](int ix) {
    const Point& pt = points[ix / engines.size()];
    const Engine engine = engines[ix % engines.size()];
    Row& row = rows[ix];
    row.point = pt;
    row.engine = engine_name(engine);
    const MismeasureSpec spec{pt.v, pt.p01, pt.p10};
    row.v_star = spec.v_star();
    try {
      const FitResult fit = engine == Engine::glm
                                ? fit_glm_ee(sample, spec, config.solver)
                                : fit_gam_ee(sample, spec, spline, config.solver);
      row.tau_hat = fit.tau_hat;
      row.ci_lo = fit.tau_ci95.first;
      row.ci_hi = fit.tau_ci95.second;
      row.converged = true;
    } catch (const Error& e) {
      row.error = e.what();
    } catch (const std::exception& e) {
      row.error = e.what();
    }
  });

  int converged = 0, excluding = 0;
  for (const Row& row : rows) {
    if (!row.converged) continue;
    ++converged;
    if (row.ci_lo > 0.0 || row.ci_hi < 0.0) ++excluding;
  }
  const double fraction =
      converged > 0 ? static_cast<double>(excluding) / converged
                    : std::numeric_limits<double>::quiet_NaN();

  std::ostringstream csv;
  csv << "v,p10,p01,v_star,engine,tau_hat,ci_lo,ci_hi,converged\n";
  for (const Row& row : rows) {
    csv << fmt_num(row.point.v) << ',' << fmt_num(row.point.p10) << ','
        << fmt_num(row.point.p01) << ',' << fmt_num(row.v_star) << ',' << row.engine << ','
        << fmt_num(row.tau_hat) << ',' << fmt_num(row.ci_lo) << ',' << fmt_num(row.ci_hi)
        << ',' << (row.converged ? 1 : 0) << '\n';
  }
  std::filesystem::create_directories(config.output_dir);
  write_text_file(std::filesystem::path(config.output_dir) / "sensitivity.csv", csv.str());

  json report;
  report["command"] = "sensitivity";
  report["seed"] = config.seed;
  report["input"] = config.input_path;
  report["engine"] = config.engine;
  json jpoints = json::array();
  for (const Row& row : rows) {
    json r = {{"v", row.point.v},       {"p10", row.point.p10}, {"p01", row.point.p01},
              {"v_star", row.v_star},   {"engine", row.engine}, {"tau_hat", row.tau_hat},
              {"ci_lo", row.ci_lo},     {"ci_hi", row.ci_hi},   {"converged", row.converged}};
    r["error"] = row.converged ? json(nullptr) : json(row.error);
    jpoints.push_back(r);
  }
  report["points"] = jpoints;
  report["n_points"] = n_rows;
  report["fraction_ci_excluding_zero"] = fraction;
  write_report(config, report);

  std::cout << "sensitivity points=" << n_rows << " converged=" << converged
            << " fraction_ci_excluding_zero=" << fraction << "\n";
  if (converged == 0) {
    std::cerr << "error: no sensitivity grid point converged\n";
    return 3;
  }
  return 0;
}

int run_command(const RunConfig& config) {
  try {
    if (config.command == "fit") return cmd_fit(config);
    if (config.command == "simulate") return cmd_simulate(config);
    if (config.command == "sensitivity") return cmd_sensitivity(config);
    throw ParseError("command must be fit, simulate, or sensitivity (got '" + config.command +
                     "')");
  } catch (const ParseError& e) {
    std::cerr << "input error: " << e.what() << "\n";
    return 2;
  } catch (const SchemaError& e) {
    std::cerr << "input error: " << e.what() << "\n";
    return 2;
  } catch (const DomainError& e) {
    std::cerr << "input error: " << e.what() << "\n";
    return 2;
  } catch (const DegenerateSample& e) {
    std::cerr << "input error: " << e.what() << "\n";
    return 2;
  } catch (const DegenerateTreatment& e) {
    std::cerr << "input error: " << e.what() << "\n";
    return 2;
  } catch (const InsufficientClass& e) {
    std::cerr << "input error: " << e.what() << "\n";
    return 2;
  } catch (const CalibrationFailure& e) {
    std::cerr << "input error: " << e.what() << "\n";
    return 2;
  } catch (const NonConvergence& e) {
    std::cerr << "numerical failure: " << e.what() << "\n";
    return 3;
  } catch (const SingularJacobian& e) {
    std::cerr << "numerical failure: " << e.what() << "\n";
    return 3;
  } catch (const RangeCollapse& e) {
    std::cerr << "numerical failure: " << e.what() << "\n";
    return 3;
  } catch (const IllConditioned& e) {
    std::cerr << "numerical failure: " << e.what() << "\n";
    return 3;
  } catch (const AllGridFailed& e) {
    std::cerr << "numerical failure: " << e.what() << "\n";
    return 3;
  } catch (const AllPointsFailed& e) {
    std::cerr << "numerical failure: " << e.what() << "\n";
    return 3;
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 4;
  } catch (const std::exception& e) {
    std::cerr << "internal error: " << e.what() << "\n";
    return 4;
  }
}

}  // namespace odsate
