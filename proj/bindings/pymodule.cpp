#include <pybind11/eigen.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include <optional>
#include <string>
#include <vector>

#include "odsate/dataset.hpp"
#include "odsate/errors.hpp"
#include "odsate/gam.hpp"
#include "odsate/glm.hpp"
#include "odsate/link.hpp"
#include "odsate/simulate.hpp"
#include "odsate/spline.hpp"

namespace py = pybind11;

namespace {

odsate::CovariateKind parse_kind(const std::string& kind) {
  if (kind == "continuous") return odsate::CovariateKind::continuous;
  if (kind == "discrete") return odsate::CovariateKind::discrete;
  throw odsate::DomainError("covariate kind", "expected 'continuous' or 'discrete', got '" + kind + "'");
}

odsate::ObservedSample make_sample(const Eigen::VectorXd& y_star, const Eigen::VectorXd& t,
                                   const Eigen::MatrixXd& x,
                                   const std::vector<std::string>& kinds) {
  odsate::ObservedSample sample;
  sample.y_star = y_star;
  sample.t = t;
  sample.x = x;
  if (kinds.empty()) {
    sample.kinds.assign(static_cast<std::size_t>(x.cols()), odsate::CovariateKind::continuous);
  } else {
    for (const auto& k : kinds) sample.kinds.push_back(parse_kind(k));
  }
  sample.validate();
  return sample;
}

odsate::MismeasureSpec make_spec(double v, double p01, double p10) {
  odsate::MismeasureSpec spec{v, p01, p10};
  spec.validate();
  return spec;
}

}  // namespace

PYBIND11_MODULE(_odsate, m) {
  m.doc() = "Treatment-effect estimation from case-control samples with outcome misclassification";

  py::register_exception<odsate::Error>(m, "OdsateError");

  py::class_<odsate::FitResult>(m, "FitResult")
      .def_property_readonly("tau_hat", [](const odsate::FitResult& r) { return r.tau_hat; })
      .def_property_readonly("tau_se", [](const odsate::FitResult& r) { return r.tau_se; })
      .def_property_readonly("tau_ci95",
                             [](const odsate::FitResult& r) {
                               return py::make_tuple(r.tau_ci95.first, r.tau_ci95.second);
                             })
      .def_property_readonly("s_hat", [](const odsate::FitResult& r) { return r.theta.s; })
      .def_property_readonly("beta", [](const odsate::FitResult& r) { return r.theta.beta; })
      .def_property_readonly("u_hat",
                             [](const odsate::FitResult& r) -> Eigen::VectorXd { return r.theta.u; })
      .def_property_readonly("v_hat", [](const odsate::FitResult& r) { return r.v_hat; })
      .def_property_readonly("v_star", [](const odsate::FitResult& r) { return r.v_star; })
      .def_property_readonly("lambda_selected",
                             [](const odsate::FitResult& r) { return r.lambda_selected; })
      .def_property_readonly("bic_trace", [](const odsate::FitResult& r) { return r.bic_trace; })
      .def_property_readonly("converged",
                             [](const odsate::FitResult& r) { return r.diagnostics.converged; })
      .def_property_readonly("iterations",
                             [](const odsate::FitResult& r) { return r.diagnostics.iterations; });

  m.def("expit", &odsate::expit, py::arg("eta"));

  m.def(
      "observed_prevalence",
      [](double v, double p01, double p10) { return make_spec(v, p01, p10).v_star(); },
      py::arg("v"), py::arg("p01"), py::arg("p10"));

  m.def(
      "adjusted_link",
      [](double eta, double s, double p01, double p10) {
        return odsate::AdjustedLink(p01, p10, s)(eta);
      },
      py::arg("eta"), py::arg("s"), py::arg("p01"), py::arg("p10"),
      "Observed-outcome mean h(eta) in the selected sample.");

  m.def(
      "adjusted_link_derivs",
      [](double eta, double s, double p01, double p10) {
        const auto d = odsate::AdjustedLink(p01, p10, s).derivs(eta);
        return py::make_tuple(d.h, d.h1, d.h2, d.hs, d.h1s);
      },
      py::arg("eta"), py::arg("s"), py::arg("p01"), py::arg("p10"),
      "(h, dh/deta, d2h/deta2, dh/ds, d(dh/deta)/ds) at one index value.");

  m.def(
      "adjusted_link_range",
      [](double s, double p01, double p10) {
        const odsate::AdjustedLink link(p01, p10, s);
        return py::make_tuple(link.infimum(), link.supremum());
      },
      py::arg("s"), py::arg("p01"), py::arg("p10"));

  m.def("clamped_knots", &odsate::clamped_knots, py::arg("lo"), py::arg("hi"),
        py::arg("segments"), py::arg("degree"));
  m.def("bspline_basis", &odsate::bspline_basis, py::arg("x"), py::arg("degree"),
        py::arg("knots"));
  m.def("difference_penalty", &odsate::difference_penalty, py::arg("order_m"),
        py::arg("dim_q"));

  m.def(
      "fit_glm_ee",
      [](const Eigen::VectorXd& y_star, const Eigen::VectorXd& t, const Eigen::MatrixXd& x,
         double v, double p01, double p10, const std::vector<std::string>& kinds) {
        return odsate::fit_glm_ee(make_sample(y_star, t, x, kinds), make_spec(v, p01, p10));
      },
      py::arg("y_star"), py::arg("t"), py::arg("x"), py::arg("v"), py::arg("p01") = 0.0,
      py::arg("p10") = 0.0, py::arg("kinds") = std::vector<std::string>{},
      "Parametric estimating-equation fit; returns a FitResult.");

  m.def(
      "fit_gam_ee",
      [](const Eigen::VectorXd& y_star, const Eigen::VectorXd& t, const Eigen::MatrixXd& x,
         double v, double p01, double p10, const std::vector<std::string>& kinds, int degree,
         int knots, int penalty_order, const std::vector<double>& lambda_grid, double gamma) {
        odsate::SplineConfig config;
        config.degree_p = degree;
        config.knots_Kn = knots;
        config.penalty_order_m = penalty_order;
        if (!lambda_grid.empty()) config.lambda_grid = lambda_grid;
        config.gamma = gamma;
        return odsate::fit_gam_ee(make_sample(y_star, t, x, kinds), make_spec(v, p01, p10),
                                  config);
      },
      py::arg("y_star"), py::arg("t"), py::arg("x"), py::arg("v"), py::arg("p01") = 0.0,
      py::arg("p10") = 0.0, py::arg("kinds") = std::vector<std::string>{},
      py::arg("degree") = 3, py::arg("knots") = 10, py::arg("penalty_order") = 2,
      py::arg("lambda_grid") = std::vector<double>{}, py::arg("gamma") = 0.1,
      "Additive-model estimating-equation fit with BIC-selected smoothing.");

  m.def(
      "true_tau_mc",
      [](const std::string& model, double v, std::uint64_t seed, long draws) {
        return odsate::true_tau_mc(odsate::parse_model_id(model), v, draws, seed);
      },
      py::arg("model"), py::arg("v"), py::arg("seed") = 1,
      py::arg("draws") = odsate::kDefaultTrueTauDraws,
      "Monte Carlo average treatment effect of a built-in benchmark model.");
}
