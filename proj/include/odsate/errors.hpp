#pragma once

#include <stdexcept>
#include <string>
#include <vector>

namespace odsate {

// Base class for every library error so callers can catch odsate failures
// without swallowing unrelated std exceptions.
struct Error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Input violates a documented precondition; `constraint` names the violated
// rule so the CLI can surface it verbatim.
struct DomainError : Error {
  DomainError(std::string constraint_name, const std::string& msg)
      : Error(constraint_name + ": " + msg), constraint(std::move(constraint_name)) {}
  std::string constraint;
};

// Newton iterations exhausted; carries the last iterate and score norm.
struct NonConvergence : Error {
  NonConvergence(const std::string& msg, int iters, double norm, std::vector<double> last)
      : Error(msg), iterations(iters), final_score_norm(norm), last_iterate(std::move(last)) {}
  int iterations;
  double final_score_norm;
  std::vector<double> last_iterate;
};

struct SingularJacobian : Error {
  SingularJacobian(const std::string& msg, double cond) : Error(msg), condition_estimate(cond) {}
  double condition_estimate;
};

// Sample cannot identify the parameters (e.g. all observed outcomes equal).
struct DegenerateSample : Error {
  using Error::Error;
};

// More than 10% of fitted means sit on the probability clamp: the adjusted
// link range has collapsed for this parameterization.
struct RangeCollapse : Error {
  RangeCollapse(const std::string& msg, double fraction) : Error(msg), clamp_fraction(fraction) {}
  double clamp_fraction;
};

// A case-control draw asked for more rows than one observed-outcome stratum holds.
struct InsufficientClass : Error {
  InsufficientClass(const std::string& msg, int cls, long avail)
      : Error(msg), y_star_class(cls), available(avail) {}
  int y_star_class;
  long available;
};

struct CalibrationFailure : Error {
  using Error::Error;
};

// CSV / config text could not be parsed; message names row and column.
struct ParseError : Error {
  using Error::Error;
};

// A required column or key is missing.
struct SchemaError : Error {
  using Error::Error;
};

struct DegenerateTreatment : Error {
  using Error::Error;
};

struct IllConditioned : Error {
  IllConditioned(const std::string& msg, double cond) : Error(msg), condition_estimate(cond) {}
  double condition_estimate;
};

struct AllGridFailed : Error {
  using Error::Error;
};

struct AllPointsFailed : Error {
  using Error::Error;
};

}  // namespace odsate
