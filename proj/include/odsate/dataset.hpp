#pragma once

#include <Eigen/Dense>
#include <string>
#include <vector>

#include "odsate/errors.hpp"

namespace odsate {

enum class CovariateKind { continuous, discrete };

// Case-control dataset: observed outcomes, treatments, covariates.
struct ObservedSample {
  Eigen::VectorXd y_star;               // entries in {0,1}
  Eigen::VectorXd t;                    // entries in {0,1}
  Eigen::MatrixXd x;                    // n x D
  std::vector<CovariateKind> kinds;     // one per covariate column
  std::vector<std::string> names;       // optional column names, size D or 0

  long n() const { return y_star.size(); }
  long d() const { return x.cols(); }

  // Throws DomainError on shape mismatch or non-binary y*/t; throws
  // DegenerateSample unless y* contains both classes.
  void validate() const;
};

// Column layout expected by load_dataset. Empty `covariates` means: take
// every column other than outcome/treatment, inferring `discrete` for
// columns whose values all lie in {0,1}.
struct DatasetSchema {
  std::string outcome_column = "outcome_star";
  std::string treatment_column = "treatment";
  std::vector<std::pair<std::string, CovariateKind>> covariates;
};

ObservedSample load_dataset(const std::string& path, const DatasetSchema& schema = {});

// Writes a CSV that load_dataset round-trips losslessly (17 significant digits).
void save_dataset(const std::string& path, const ObservedSample& sample);

}  // namespace odsate
