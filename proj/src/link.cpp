#include "odsate/link.hpp"

#include <cmath>
#include <string>

namespace odsate {
namespace {

constexpr double kTiny = 1e-300;

void check_rates(double p01, double p10) {
  if (!(p01 >= 0.0 && p01 < 1.0))
    throw DomainError("0 <= p01 < 1", "p01 = " + std::to_string(p01));
  if (!(p10 >= 0.0 && p10 < 1.0))
    throw DomainError("0 <= p10 < 1", "p10 = " + std::to_string(p10));
  if (!(p01 + p10 < 1.0))
    throw DomainError("p01 + p10 < 1",
                      "p01 + p10 = " + std::to_string(p01 + p10));
}

}  // namespace

void MismeasureSpec::validate() const {
  if (!(v >= 0.0 && v <= 1.0))
    throw DomainError("0 <= v <= 1", "v = " + std::to_string(v));
  check_rates(p01, p10);
}

double MismeasureSpec::v_star() const {
  validate();
  return (1.0 - p10 - p01) * v + p01;
}

double expit(double eta) {
  // Branch on sign so exp never overflows.
  if (eta >= 0.0) {
    const double e = std::exp(-eta);
    return 1.0 / (1.0 + e);
  }
  const double e = std::exp(eta);
  return e / (1.0 + e);
}

AdjustedLink::AdjustedLink(double p01, double p10, double s)
    : p01_(p01), p10_(p10), s_(s) {
  check_rates(p01, p10);
  if (!(s > 0.0)) throw DomainError("s > 0", "s = " + std::to_string(s));
  a_ = p01;
  b_ = 1.0 - p10;
  c0_ = 1.0 + a_ * (s - 1.0);
  c1_ = 1.0 + b_ * (s - 1.0);
}

double AdjustedLink::operator()(double eta) const {
  if (eta <= 0.0) {
    const double e = std::exp(eta);
    return s_ * (a_ + b_ * e) / (c0_ + c1_ * e);
  }
  // Normalize by e^eta so large indices cannot overflow.
  const double f = std::exp(-eta);
  return s_ * (a_ * f + b_) / (c0_ * f + c1_);
}

LinkDerivs AdjustedLink::derivs(double eta) const {
  LinkDerivs d;
  const double ba = b_ - a_;  // 1 - p10 - p01 > 0
  if (eta <= 0.0) {
    const double e = std::exp(eta);
    const double den = c0_ + c1_ * e;
    const double p = a_ + b_ * e;
    d.h = s_ * p / den;
    d.h1 = s_ * ba * e / (den * den);
    d.h2 = d.h1 * (c0_ - c1_ * e) / den;
    d.hs = p * ((1.0 - a_) + (1.0 - b_) * e) / (den * den);
    d.h1s = ba * e * (den - 2.0 * s_ * p) / (den * den * den);
  } else {
    const double f = std::exp(-eta);
    const double den = c0_ * f + c1_;
    const double p = a_ * f + b_;
    d.h = s_ * p / den;
    d.h1 = s_ * ba * f / (den * den);
    d.h2 = d.h1 * (c0_ * f - c1_) / den;
    d.hs = p * ((1.0 - a_) * f + (1.0 - b_)) / (den * den);
    d.h1s = ba * f * (den - 2.0 * s_ * p) / (den * den * den);
  }
  if (d.h1 < kTiny) d.h1 = kTiny;  // h is strictly increasing; guard underflow
  return d;
}

double AdjustedLink::infimum() const { return a_ * s_ / c0_; }

double AdjustedLink::supremum() const { return b_ * s_ / c1_; }

double observed_prevalence(const MismeasureSpec& spec) { return spec.v_star(); }

double true_prevalence_from_observed(double v_star, double p01, double p10) {
  check_rates(p01, p10);
  const double v = (v_star - p01) / (1.0 - p10 - p01);
  if (!(v >= 0.0 && v <= 1.0))
    throw DomainError("p01 <= v_star <= 1 - p10",
                      "implied v = " + std::to_string(v) + " outside [0,1]");
  return v;
}

double sampling_ratio(double v_star, double case_fraction) {
  if (!(v_star > 0.0 && v_star < 1.0))
    throw DomainError("0 < v_star < 1", "v_star = " + std::to_string(v_star));
  if (!(case_fraction > 0.0 && case_fraction < 1.0))
    throw DomainError("0 < case_fraction < 1",
                      "case_fraction = " + std::to_string(case_fraction));
  return (case_fraction / v_star) / ((1.0 - case_fraction) / (1.0 - v_star));
}

double invert_outcome_regression(double g_star, const AdjustedLink& link) {
  if (!(g_star > link.infimum()))
    throw DomainError("g_star > infimum",
                      "g_star = " + std::to_string(g_star) +
                          " <= " + std::to_string(link.infimum()));
  if (!(g_star < link.supremum()))
    throw DomainError("g_star < supremum",
                      "g_star = " + std::to_string(g_star) +
                          " >= " + std::to_string(link.supremum()));
  const double s = link.s();
  const double tilted = g_star / (s - g_star * (s - 1.0));
  return (tilted - link.p01()) / (1.0 - link.p10() - link.p01());
}

}  // namespace odsate
