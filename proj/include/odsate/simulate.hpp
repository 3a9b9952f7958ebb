#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "odsate/dataset.hpp"
#include "odsate/gam.hpp"
#include "odsate/glm.hpp"
#include "odsate/rng.hpp"

namespace odsate {

enum class ModelId { M1, M2, M3, M4 };

ModelId parse_model_id(const std::string& text);   // "M1".."M4"
std::string model_id_name(ModelId id);

struct ScenarioSpec {
  ModelId model_id = ModelId::M1;
  double v = 0.01;
  double p01 = 0.0;
  double p10 = 0.0;
  long n_sample = 2000;              // total; half cases, half controls
  long pool_size = 1'000'000;
  int replications = 200;
  std::uint64_t seed = 1;
  void validate() const;
};

// Finite synthetic population: true and observed outcomes plus covariates,
// with the observed-outcome strata pre-indexed for case-control draws.
struct DataPool {
  Eigen::VectorXd y;
  Eigen::VectorXd y_star;
  Eigen::VectorXd t;
  Eigen::VectorXd u;
  Eigen::VectorXd x1;
  Eigen::VectorXd x2;
  double a0 = 0.0;
  std::vector<Eigen::Index> case_rows;
  std::vector<Eigen::Index> control_rows;
  Eigen::Index n() const { return y.size(); }
};

// Linear-index value without its intercept, as a function of (t, u, x1, x2);
// used to plug custom outcome models into the generator.
using IndexFn = std::function<double(double t, double u, double x1, double x2)>;

IndexFn model_index(ModelId id);

// Intercept a0 such that the mean of expit(a0 + index) over a fixed
// 500,000-unit draw (keyed by seed) is within 2% relative of v; bisection on
// [-40, 10]. Results for the built-in models are cached per (model, v, seed).
double calibrate_a0(ModelId id, double v, std::uint64_t seed);
double calibrate_a0(const IndexFn& index, double v, std::uint64_t seed);

// Independent misclassification: 1->0 with probability p10, 0->1 with p01.
Eigen::VectorXd misclassify(const Eigen::VectorXd& y, double p01, double p10, RngStream& rng);

// Population draw: covariates, propensity-based treatment, calibrated
// outcome, misclassified observed outcome. Deterministic given the scenario.
DataPool generate_pool(const ScenarioSpec& scenario);
DataPool generate_pool(const IndexFn& index, double v, double p01, double p10, long pool_size,
                       std::uint64_t seed);

// Uniform within-stratum sampling without replacement; covariate order is
// (u, x1, x2). Throws InsufficientClass naming the deficient stratum.
ObservedSample case_control_sample(const DataPool& pool, long n_cases, long n_controls,
                                   RngStream& rng);

// Monte Carlo ATE of the data-generating model at the calibrated intercept:
// mean of expit(index at t=1) - expit(index at t=0) over n_mc fresh draws.
double true_tau_mc(ModelId id, double v, long n_mc, std::uint64_t seed);
double true_tau_mc(const IndexFn& index, double v, long n_mc, std::uint64_t seed);
inline constexpr long kDefaultTrueTauDraws = 2'000'000;

// Hajek-normalized IPTW contrast of y* with a logistic propensity of t on
// (u, x1, x2); denominators clipped at 1e-6. Throws DegenerateTreatment.
double iptw_estimate(const ObservedSample& sample);

enum class NaiveVariant { naive1, naive2, naive3 };
enum class Engine { glm, gam };

// Baseline fits that deliberately ignore parts of the design: naive1 fixes
// p01=p10=0 and s=1; naive2 fixes s=1 keeping the rates; naive3 fixes
// p01=p10=0 keeping the estimated ratio.
FitResult naive_fit(const ObservedSample& sample, const MismeasureSpec& spec,
                    NaiveVariant variant, Engine engine, const SplineConfig& config = {},
                    const SolveOptions& opts = {});

struct MethodResult {
  double tau_hat = std::numeric_limits<double>::quiet_NaN();
  double se = std::numeric_limits<double>::quiet_NaN();
  double ci_lo = std::numeric_limits<double>::quiet_NaN();
  double ci_hi = std::numeric_limits<double>::quiet_NaN();
  bool converged = false;
  bool has_ci = false;
};

struct Method {
  std::string name;
  std::function<MethodResult(const ObservedSample&)> fit;
};

struct ScenarioMetrics {
  std::string method;
  double rbias_pct = std::numeric_limits<double>::quiet_NaN();
  double rmse_x1000 = std::numeric_limits<double>::quiet_NaN();
  double coverage_pct = std::numeric_limits<double>::quiet_NaN();
  double mean_tau_hat = std::numeric_limits<double>::quiet_NaN();
  double true_tau = std::numeric_limits<double>::quiet_NaN();
  int n_converged = 0;
  int n_total = 0;
  double empirical_var = std::numeric_limits<double>::quiet_NaN();
  double median_model_var = std::numeric_limits<double>::quiet_NaN();
  bool aborted = false;  // > 20% of replications failed
};

// The full comparison battery for a scenario: glm_ee, gam_ee, the three
// naive variants (on the parametric engine), and iptw.
std::vector<Method> standard_methods(const MismeasureSpec& spec, const SplineConfig& config,
                                     const SolveOptions& opts = {});
MethodResult method_result_from_fit(const FitResult& fit);

// Replication r draws its case-control sample from the substream
// (seed, r, sample stage), so the table is identical for any worker count.
// Per-replication results land in fixed slots; aggregation is sequential.
std::vector<ScenarioMetrics> run_replications(const ScenarioSpec& scenario,
                                              const std::vector<Method>& methods,
                                              int jobs = 1);
std::vector<ScenarioMetrics> run_replications(const ScenarioSpec& scenario,
                                              const std::vector<Method>& methods, int jobs,
                                              double true_tau, const DataPool& pool);

}  // namespace odsate
