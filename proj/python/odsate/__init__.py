"""Treatment-effect estimation from case-control samples with outcome misclassification."""

from ._odsate import (
    FitResult,
    OdsateError,
    adjusted_link,
    adjusted_link_derivs,
    adjusted_link_range,
    bspline_basis,
    clamped_knots,
    difference_penalty,
    expit,
    fit_gam_ee,
    fit_glm_ee,
    observed_prevalence,
    true_tau_mc,
)

__all__ = [
    "FitResult",
    "OdsateError",
    "adjusted_link",
    "adjusted_link_derivs",
    "adjusted_link_range",
    "bspline_basis",
    "clamped_knots",
    "difference_penalty",
    "expit",
    "fit_gam_ee",
    "fit_glm_ee",
    "observed_prevalence",
    "true_tau_mc",
]
