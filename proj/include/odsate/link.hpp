#pragma once

#include "odsate/errors.hpp"

namespace odsate {

// Externally supplied nuisance knowledge: true prevalence v, false positive
// rate p01 = P(Y*=1|Y=0), false negative rate p10 = P(Y*=0|Y=1).
struct MismeasureSpec {
  double v = 0.0;
  double p01 = 0.0;
  double p10 = 0.0;

  // Throws DomainError when 0<=v<=1, 0<=p01<1, 0<=p10<1 or p01+p10<1 fails.
  void validate() const;

  // Observed prevalence v* = (1-p10-p01)*v + p01.
  double v_star() const;
};

double expit(double eta);

// Value and derivatives of the adjusted link at one index value.
struct LinkDerivs {
  double h;    // link value
  double h1;   // dh/deta
  double h2;   // d2h/deta2
  double hs;   // dh/ds at fixed eta
  double h1s;  // d(h1)/ds at fixed eta
};

// Mean of the observed outcome given the index, inside the selected sample:
//   h(eta) = s*(p01 + (1-p10)*e^eta) / (1 + p01*(s-1) + e^eta*(1 + (1-p10)*(s-1))).
// Composes the logistic outcome model with misclassification and
// outcome-dependent selection; degenerates to expit when p01=p10=0, s=1.
// Immutable value object; s is injected, never re-derived here.
class AdjustedLink {
 public:
  AdjustedLink(double p01, double p10, double s);

  double operator()(double eta) const;
  LinkDerivs derivs(double eta) const;

  // Range endpoints approached as eta -> -inf / +inf.
  double infimum() const;
  double supremum() const;

  double p01() const { return p01_; }
  double p10() const { return p10_; }
  double s() const { return s_; }

 private:
  double p01_, p10_, s_;
  double a_;   // p01
  double b_;   // 1 - p10
  double c0_;  // 1 + p01*(s-1)
  double c1_;  // 1 + (1-p10)*(s-1)
};

// v* from (v, p01, p10).
double observed_prevalence(const MismeasureSpec& spec);

// v = (v* - p01) / (1 - p10 - p01); DomainError if outside [0,1].
double true_prevalence_from_observed(double v_star, double p01, double p10);

// s = (case_fraction/v*) / ((1-case_fraction)/(1-v*)).
double sampling_ratio(double v_star, double case_fraction);

// Recovers the true outcome regression g = P(Y=1|...) from the observed
// selected-sample regression g*; inverse of g -> h(logit(g)).
double invert_outcome_regression(double g_star, const AdjustedLink& link);

}  // namespace odsate
