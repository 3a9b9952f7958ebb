#include "odsate/simulate.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <map>
#include <mutex>
#include <numeric>
#include <thread>
#include <tuple>

#include "odsate/errors.hpp"
#include "odsate/link.hpp"
#include "odsate/solver.hpp"
#include "stacked_detail.hpp"

namespace odsate {

namespace {

constexpr double kPi = 3.141592653589793238462643;
constexpr long kCalibrationDraws = 500'000;
constexpr double kCalibrationRelTol = 0.02;
constexpr double kA0Lo = -40.0, kA0Hi = 10.0;
constexpr double kAbortFraction = 0.20;

double propensity(double u, double x1, double x2) {
  return expit(1.0 + 0.1 * x1 - 0.1 * x2 - 0.5 * u);
}

struct CovariateDraw {
  double x1, x2, u, t;
};

CovariateDraw draw_unit(RngStream& rng) {
  CovariateDraw d{};
  d.x1 = rng.normal();
  d.x2 = rng.uniform();
  d.u = rng.bernoulli(0.5) ? 1.0 : 0.0;
  d.t = rng.bernoulli(propensity(d.u, d.x1, d.x2)) ? 1.0 : 0.0;
  return d;
}

}  // namespace

ModelId parse_model_id(const std::string& text) {
  if (text == "M1") return ModelId::M1;
  if (text == "M2") return ModelId::M2;
  if (text == "M3") return ModelId::M3;
  if (text == "M4") return ModelId::M4;
  throw ParseError("unknown model id '" + text + "' (expected M1..M4)");
}

std::string model_id_name(ModelId id) {
  switch (id) {
    case ModelId::M1: return "M1";
    case ModelId::M2: return "M2";
    case ModelId::M3: return "M3";
    case ModelId::M4: return "M4";
  }
  return "M?";
}

void ScenarioSpec::validate() const {
  MismeasureSpec{v, p01, p10}.validate();
  if (n_sample <= 0 || n_sample % 2 != 0) {
    throw DomainError("n_sample even", "total sample size must be a positive even number");
  }
  if (pool_size < n_sample) {
    throw DomainError("pool_size >= n_sample", "population smaller than the requested sample");
  }
  if (replications < 1) throw DomainError("replications >= 1", "need at least one replication");
}

IndexFn model_index(ModelId id) {
  switch (id) {
    case ModelId::M1:
      return [](double t, double u, double x1, double x2) {
        return -2.0 * t - u - 0.5 * x1 + x2;
      };
    case ModelId::M2:
      return [](double t, double u, double x1, double x2) {
        const double c = 3.0 * (x2 - 0.5);
        return -2.0 * t - u - std::sin(3.0 * kPi * x1) + c * c * c;
      };
    case ModelId::M3:
      return [](double t, double u, double x1, double x2) {
        return -2.0 * t - u - std::exp(2.0 * x1) - std::sin(3.0 * kPi * x2) * x2;
      };
    case ModelId::M4:
      return [](double t, double u, double x1, double x2) {
        const double c = 3.0 * (x2 - 0.5);
        return -2.0 * t - u - std::exp(2.0 * x1) + c * c * c + x1 * x2;
      };
  }
  throw DomainError("model id", "unreachable");
}

double calibrate_a0(const IndexFn& index, double v, std::uint64_t seed) {
  if (!(v > 0.0 && v < 1.0)) {
    throw CalibrationFailure("target prevalence must lie strictly inside (0, 1)");
  }
  RngStream rng(seed, 0, Stage::calibration);
  std::vector<double> base(kCalibrationDraws);
  for (long i = 0; i < kCalibrationDraws; ++i) {
    const CovariateDraw d = draw_unit(rng);
    base[i] = index(d.t, d.u, d.x1, d.x2);
  }
  const auto prevalence = [&](double a0) {
    double acc = 0.0;
    for (double b : base) acc += expit(a0 + b);
    return acc / static_cast<double>(kCalibrationDraws);
  };

  double lo = kA0Lo, hi = kA0Hi;
  double f_lo = prevalence(lo), f_hi = prevalence(hi);
  if (!(f_lo <= v && v <= f_hi)) {
    throw CalibrationFailure("prevalence " + std::to_string(v) +
                             " cannot be bracketed on the intercept range [-40, 10]");
  }
  for (int iter = 0; iter < 200; ++iter) {
    const double mid = 0.5 * (lo + hi);
    const double f_mid = prevalence(mid);
    if (std::abs(f_mid - v) <= kCalibrationRelTol * v) return mid;
    if (f_mid < v) {
      lo = mid;
    } else {
      hi = mid;
    }
  }
  throw CalibrationFailure("intercept bisection did not reach the prevalence tolerance");
}

double calibrate_a0(ModelId id, double v, std::uint64_t seed) {
  static std::mutex cache_mutex;
  static std::map<std::tuple<int, double, std::uint64_t>, double> cache;
  const auto key = std::make_tuple(static_cast<int>(id), v, seed);
  {
    std::lock_guard<std::mutex> lock(cache_mutex);
    const auto it = cache.find(key);
    if (it != cache.end()) return it->second;
  }
  const double a0 = calibrate_a0(model_index(id), v, seed);
  std::lock_guard<std::mutex> lock(cache_mutex);
  cache.emplace(key, a0);
  return a0;
}

Eigen::VectorXd misclassify(const Eigen::VectorXd& y, double p01, double p10, RngStream& rng) {
  Eigen::VectorXd out(y.size());
  for (Eigen::Index i = 0; i < y.size(); ++i) {
    if (y[i] == 1.0) {
      out[i] = rng.bernoulli(p10) ? 0.0 : 1.0;
    } else {
      out[i] = rng.bernoulli(p01) ? 1.0 : 0.0;
    }
  }
  return out;
}

namespace {

DataPool make_pool(const IndexFn& index, double a0, double p01, double p10, long pool_size,
                   std::uint64_t seed) {
  DataPool pool;
  pool.a0 = a0;
  pool.y.resize(pool_size);
  pool.t.resize(pool_size);
  pool.u.resize(pool_size);
  pool.x1.resize(pool_size);
  pool.x2.resize(pool_size);
  RngStream rng(seed, 0, Stage::pool);
  for (long i = 0; i < pool_size; ++i) {
    const CovariateDraw d = draw_unit(rng);
    pool.x1[i] = d.x1;
    pool.x2[i] = d.x2;
    pool.u[i] = d.u;
    pool.t[i] = d.t;
    pool.y[i] = rng.bernoulli(expit(a0 + index(d.t, d.u, d.x1, d.x2))) ? 1.0 : 0.0;
  }
  pool.y_star = misclassify(pool.y, p01, p10, rng);
  pool.case_rows.reserve(pool_size / 16);
  for (Eigen::Index i = 0; i < pool.n(); ++i) {
    (pool.y_star[i] == 1.0 ? pool.case_rows : pool.control_rows).push_back(i);
  }
  return pool;
}

}  // namespace

DataPool generate_pool(const IndexFn& index, double v, double p01, double p10, long pool_size,
                       std::uint64_t seed) {
  return make_pool(index, calibrate_a0(index, v, seed), p01, p10, pool_size, seed);
}

DataPool generate_pool(const ScenarioSpec& scenario) {
  scenario.validate();
  // Built-in models reuse the cached intercept.
  const double a0 = calibrate_a0(scenario.model_id, scenario.v, scenario.seed);
  return make_pool(model_index(scenario.model_id), a0, scenario.p01, scenario.p10,
                   scenario.pool_size, scenario.seed);
}

namespace {

// Partial Fisher-Yates: the first `take` entries of a working copy become a
// uniform without-replacement draw.
std::vector<Eigen::Index> draw_without_replacement(const std::vector<Eigen::Index>& rows,
                                                   long take, int y_class, RngStream& rng) {
  if (static_cast<long>(rows.size()) < take) {
    throw InsufficientClass("stratum y*=" + std::to_string(y_class) + " holds " +
                                std::to_string(rows.size()) + " rows, need " +
                                std::to_string(take),
                            y_class, static_cast<long>(rows.size()));
  }
  std::vector<Eigen::Index> work = rows;
  std::vector<Eigen::Index> out(take);
  for (long i = 0; i < take; ++i) {
    const std::uint64_t j = i + rng.below(work.size() - i);
    std::swap(work[i], work[j]);
    out[i] = work[i];
  }
  return out;
}

}  // namespace

ObservedSample case_control_sample(const DataPool& pool, long n_cases, long n_controls,
                                   RngStream& rng) {
  const std::vector<Eigen::Index> cases =
      draw_without_replacement(pool.case_rows, n_cases, 1, rng);
  const std::vector<Eigen::Index> controls =
      draw_without_replacement(pool.control_rows, n_controls, 0, rng);

  ObservedSample sample;
  const long n = n_cases + n_controls;
  sample.y_star.resize(n);
  sample.t.resize(n);
  sample.x.resize(n, 3);
  sample.kinds = {CovariateKind::discrete, CovariateKind::continuous,
                  CovariateKind::continuous};
  sample.names = {"u", "x1", "x2"};
  long r = 0;
  for (const auto& rows : {cases, controls}) {
    for (Eigen::Index i : rows) {
      sample.y_star[r] = pool.y_star[i];
      sample.t[r] = pool.t[i];
      sample.x(r, 0) = pool.u[i];
      sample.x(r, 1) = pool.x1[i];
      sample.x(r, 2) = pool.x2[i];
      ++r;
    }
  }
  return sample;
}

namespace {

double tau_mc_at(const IndexFn& index, double a0, long n_mc, std::uint64_t seed) {
  RngStream rng(seed, 0, Stage::truth);
  double acc = 0.0;
  for (long i = 0; i < n_mc; ++i) {
    const double x1 = rng.normal();
    const double x2 = rng.uniform();
    const double u = rng.bernoulli(0.5) ? 1.0 : 0.0;
    acc += expit(a0 + index(1.0, u, x1, x2)) - expit(a0 + index(0.0, u, x1, x2));
  }
  return acc / static_cast<double>(n_mc);
}

}  // namespace

double true_tau_mc(const IndexFn& index, double v, long n_mc, std::uint64_t seed) {
  return tau_mc_at(index, calibrate_a0(index, v, seed), n_mc, seed);
}

double true_tau_mc(ModelId id, double v, long n_mc, std::uint64_t seed) {
  return tau_mc_at(model_index(id), calibrate_a0(id, v, seed), n_mc, seed);
}

double iptw_estimate(const ObservedSample& sample) {
  sample.validate();
  const Eigen::Index n = sample.n();
  const double treated = sample.t.sum();
  if (treated == 0.0 || treated == static_cast<double>(n)) {
    throw DegenerateTreatment("propensity model needs both treatment arms");
  }

  // Plain logistic ML of t on (1, x): the adjusted link with p01=p10=0, s=1.
  Eigen::MatrixXd z(n, 1 + sample.d());
  z.col(0).setOnes();
  z.rightCols(sample.d()) = sample.x;
  const AdjustedLink logistic(0.0, 0.0, 1.0);
  const auto equation = [&](const Eigen::VectorXd& b) {
    return detail::design_score(z, sample.t, b, logistic);
  };
  const auto jacobian = [&](const Eigen::VectorXd& b) {
    return detail::design_score_jacobian(z, sample.t, b, logistic);
  };
  const Eigen::VectorXd beta =
      newton_solve(equation, jacobian, detail::warm_start(z.cols(), 0, sample.t, logistic)).first;

  const Eigen::VectorXd e = (z * beta).unaryExpr([](double v) { return expit(v); });
  double num1 = 0.0, den1 = 0.0, num0 = 0.0, den0 = 0.0;
  for (Eigen::Index i = 0; i < n; ++i) {
    const double w1 = sample.t[i] / std::max(e[i], 1e-6);
    const double w0 = (1.0 - sample.t[i]) / std::max(1.0 - e[i], 1e-6);
    num1 += w1 * sample.y_star[i];
    den1 += w1;
    num0 += w0 * sample.y_star[i];
    den0 += w0;
  }
  return num1 / den1 - num0 / den0;
}

FitResult naive_fit(const ObservedSample& sample, const MismeasureSpec& spec,
                    NaiveVariant variant, Engine engine, const SplineConfig& config,
                    const SolveOptions& opts) {
  MismeasureSpec used = spec;
  std::optional<double> fixed_s;
  switch (variant) {
    case NaiveVariant::naive1:
      used.p01 = 0.0;
      used.p10 = 0.0;
      fixed_s = 1.0;
      break;
    case NaiveVariant::naive2:
      fixed_s = 1.0;
      break;
    case NaiveVariant::naive3:
      used.p01 = 0.0;
      used.p10 = 0.0;
      break;
  }
  return engine == Engine::glm ? fit_glm_ee(sample, used, opts, fixed_s)
                               : fit_gam_ee(sample, used, config, opts, fixed_s);
}

MethodResult method_result_from_fit(const FitResult& fit) {
  MethodResult r;
  r.tau_hat = fit.tau_hat;
  r.se = fit.tau_se;
  r.ci_lo = fit.tau_ci95.first;
  r.ci_hi = fit.tau_ci95.second;
  r.converged = true;
  r.has_ci = true;
  return r;
}

std::vector<Method> standard_methods(const MismeasureSpec& spec, const SplineConfig& config,
                                     const SolveOptions& opts) {
  std::vector<Method> methods;
  methods.push_back({"glm_ee", [spec, opts](const ObservedSample& s) {
                       return method_result_from_fit(fit_glm_ee(s, spec, opts));
                     }});
  methods.push_back({"gam_ee", [spec, config, opts](const ObservedSample& s) {
                       return method_result_from_fit(fit_gam_ee(s, spec, config, opts));
                     }});
  const auto naive = [spec, config, opts](NaiveVariant v) {
    return [spec, config, opts, v](const ObservedSample& s) {
      return method_result_from_fit(naive_fit(s, spec, v, Engine::glm, config, opts));
    };
  };
  methods.push_back({"naive1", naive(NaiveVariant::naive1)});
  methods.push_back({"naive2", naive(NaiveVariant::naive2)});
  methods.push_back({"naive3", naive(NaiveVariant::naive3)});
  methods.push_back({"iptw", [](const ObservedSample& s) {
                       MethodResult r;
                       r.tau_hat = iptw_estimate(s);
                       r.converged = true;
                       r.has_ci = false;
                       return r;
                     }});
  return methods;
}

std::vector<ScenarioMetrics> run_replications(const ScenarioSpec& scenario,
                                              const std::vector<Method>& methods, int jobs,
                                              double true_tau, const DataPool& pool) {
  scenario.validate();
  const int reps = scenario.replications;
  const std::size_t n_methods = methods.size();
  const long half = scenario.n_sample / 2;

  // Fixed result slots: [rep][method], filled by whichever worker takes rep.
  std::vector<std::vector<MethodResult>> slots(
      reps, std::vector<MethodResult>(n_methods));

  std::atomic<int> next{0};
  const auto worker = [&]() {
    for (;;) {
      const int r = next.fetch_add(1);
      if (r >= reps) return;
      RngStream rng(scenario.seed, static_cast<std::uint64_t>(r) + 1, Stage::sample);
      const ObservedSample sample = case_control_sample(pool, half, half, rng);
      for (std::size_t m = 0; m < n_methods; ++m) {
        try {
          slots[r][m] = methods[m].fit(sample);
        } catch (const Error&) {
          slots[r][m] = MethodResult{};  // converged=false
        }
      }
    }
  };
  const int n_workers = std::max(1, std::min(jobs, reps));
  if (n_workers == 1) {
    worker();
  } else {
    std::vector<std::thread> threads;
    threads.reserve(n_workers);
    for (int k = 0; k < n_workers; ++k) threads.emplace_back(worker);
    for (auto& th : threads) th.join();
  }

  std::vector<ScenarioMetrics> table(n_methods);
  for (std::size_t m = 0; m < n_methods; ++m) {
    ScenarioMetrics& row = table[m];
    row.method = methods[m].name;
    row.true_tau = true_tau;
    row.n_total = reps;
    std::vector<double> taus, model_vars;
    int ci_hits = 0, ci_total = 0;
    for (int r = 0; r < reps; ++r) {
      const MethodResult& res = slots[r][m];
      if (!res.converged) continue;
      taus.push_back(res.tau_hat);
      if (res.has_ci) {
        ++ci_total;
        if (res.ci_lo <= true_tau && true_tau <= res.ci_hi) ++ci_hits;
        model_vars.push_back(res.se * res.se);
      }
    }
    row.n_converged = static_cast<int>(taus.size());
    row.aborted =
        static_cast<double>(reps - row.n_converged) > kAbortFraction * reps;
    if (taus.empty()) continue;
    const double n_conv = static_cast<double>(taus.size());
    const double mean_tau = std::accumulate(taus.begin(), taus.end(), 0.0) / n_conv;
    row.mean_tau_hat = mean_tau;
    row.rbias_pct = 100.0 * (mean_tau - true_tau) / true_tau;
    double mse = 0.0, var = 0.0;
    for (double tau : taus) {
      mse += (tau - true_tau) * (tau - true_tau);
      var += (tau - mean_tau) * (tau - mean_tau);
    }
    row.rmse_x1000 = std::sqrt(mse / n_conv) * 1000.0;
    row.empirical_var = taus.size() > 1 ? var / (n_conv - 1.0)
                                        : std::numeric_limits<double>::quiet_NaN();
    if (ci_total > 0) {
      row.coverage_pct = 100.0 * static_cast<double>(ci_hits) / ci_total;
      std::sort(model_vars.begin(), model_vars.end());
      const std::size_t k = model_vars.size();
      row.median_model_var =
          k % 2 == 1 ? model_vars[k / 2] : 0.5 * (model_vars[k / 2 - 1] + model_vars[k / 2]);
    }
  }
  return table;
}

std::vector<ScenarioMetrics> run_replications(const ScenarioSpec& scenario,
                                              const std::vector<Method>& methods, int jobs) {
  const DataPool pool = generate_pool(scenario);
  const double tau =
      true_tau_mc(scenario.model_id, scenario.v, kDefaultTrueTauDraws, scenario.seed);
  return run_replications(scenario, methods, jobs, tau, pool);
}

}  // namespace odsate
