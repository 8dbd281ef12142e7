"""Low-rank parametric solves with randomized a posteriori error certificates."""

__version__ = "0.1.0"

from .grid import ParameterGrid, PointSet, quantile_axis, uniform_axis  # noqa: E402
from .linalg import AffineOperator, AffineRHS, GramPair, affine_assemble, factorize  # noqa: E402
from .models import IntertwinedCertifier, PGDRegressor, RandomizedErrorEstimator  # noqa: E402

__all__ = [
    "__version__",
    "AffineOperator",
    "AffineRHS",
    "GramPair",
    "IntertwinedCertifier",
    "PGDRegressor",
    "ParameterGrid",
    "PointSet",
    "RandomizedErrorEstimator",
    "affine_assemble",
    "factorize",
    "quantile_axis",
    "uniform_axis",
]
