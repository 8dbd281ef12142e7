"""Baseline indicators, effectivity diagnostics and the intertwined primal-dual loop."""

from .alpha import alpha_2k, alpha_2k_parts, alpha_ratio, increment_estimates
from .baselines import (
    MODES,
    SingularOperatorError,
    condition_profile,
    kappa_oracle,
    residual_estimator,
    stagnation_estimator,
)
from .intertwined import DualRankExceeded, IntertwinedAbort, IntertwinedConfig, intertwined_solve
from .report import (
    REPORT_SCHEMA,
    CertificateReport,
    EffectivityTable,
    IterationRecord,
    baseline_curves,
    effectivity_report,
    jsonable,
    sqrt_f_cdf,
    validate_report,
)
from .truth import CACHE_ENV, TrueErrors, true_errors, truth_solutions

__all__ = [
    "CACHE_ENV",
    "MODES",
    "REPORT_SCHEMA",
    "CertificateReport",
    "DualRankExceeded",
    "EffectivityTable",
    "IntertwinedAbort",
    "IntertwinedConfig",
    "IterationRecord",
    "SingularOperatorError",
    "TrueErrors",
    "alpha_2k",
    "alpha_2k_parts",
    "alpha_ratio",
    "baseline_curves",
    "condition_profile",
    "effectivity_report",
    "increment_estimates",
    "intertwined_solve",
    "jsonable",
    "kappa_oracle",
    "residual_estimator",
    "sqrt_f_cdf",
    "stagnation_estimator",
    "true_errors",
    "truth_solutions",
    "validate_report",
]
