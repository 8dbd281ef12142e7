"""Gaussian sketches, sample sizes and randomized error estimators."""

from .bounds import (
    chi2_tail_bound,
    f_cdf,
    f_effectivity_bound,
    reg_inc_beta,
    sample_size,
    table1,
)
from .estimators import (
    DENOMINATOR_FLOOR,
    EstimateBundle,
    ExactDual,
    dual_projections,
    exact_estimators,
    fast_estimators,
    sketch_tensor_projections,
)
from .gaussian import (
    RNG_ID,
    GaussianSketch,
    SigmaSpec,
    draw_sketch,
    estimate_norm,
    load_sketch,
    save_sketch,
    standard_normal_column,
)

__all__ = [
    "DENOMINATOR_FLOOR",
    "RNG_ID",
    "EstimateBundle",
    "ExactDual",
    "GaussianSketch",
    "SigmaSpec",
    "chi2_tail_bound",
    "draw_sketch",
    "dual_projections",
    "estimate_norm",
    "exact_estimators",
    "f_cdf",
    "f_effectivity_bound",
    "fast_estimators",
    "load_sketch",
    "reg_inc_beta",
    "sample_size",
    "save_sketch",
    "sketch_tensor_projections",
    "standard_normal_column",
    "table1",
]
