"""Benchmark problem generators and file-based problem exchange."""

from ..grid import quantile_axis, uniform_axis
from .elasticity import (
    Benchmark,
    ElasticitySpec,
    LogField,
    anchor_lattice,
    anchor_weights,
    build_harmonic_bar,
    build_highdim_elasticity,
    h1_gram,
    harmonic_grid,
    harmonic_problem,
    highdim_grid,
    highdim_problem,
    l2_gram,
)
from .external import ProblemFormatError, export_problem, load_external
from .fem import MeshSpec, element_stresses, plane_stress_matrix
from .kl import KLModes, kl_modes

__all__ = [
    "Benchmark",
    "ElasticitySpec",
    "KLModes",
    "LogField",
    "MeshSpec",
    "ProblemFormatError",
    "anchor_lattice",
    "anchor_weights",
    "build_harmonic_bar",
    "build_highdim_elasticity",
    "element_stresses",
    "export_problem",
    "h1_gram",
    "harmonic_grid",
    "harmonic_problem",
    "highdim_grid",
    "highdim_problem",
    "kl_modes",
    "l2_gram",
    "load_external",
    "plane_stress_matrix",
    "quantile_axis",
    "uniform_axis",
]
