"""Canonical tensors and greedy PGD construction."""

from .greedy import (
    FORMULATIONS,
    CorrectionRejected,
    CorrectionState,
    GreedyBuilder,
    GreedyConfig,
    als_sweep,
    dual_greedy_solve,
    greedy_solve,
    rank_one_correction,
    summation_points,
)
from .residual import ResidualExpansion, residual, residual_index
from .tensor import CanonicalTensor, load_tensor, save_tensor


def evaluate(t, mu):
    """Value of the canonical tensor ``t`` at the grid parameter ``mu``."""
    return t.evaluate(mu)


__all__ = [
    "FORMULATIONS",
    "CanonicalTensor",
    "CorrectionRejected",
    "CorrectionState",
    "GreedyBuilder",
    "GreedyConfig",
    "ResidualExpansion",
    "als_sweep",
    "dual_greedy_solve",
    "evaluate",
    "greedy_solve",
    "load_tensor",
    "rank_one_correction",
    "residual",
    "residual_index",
    "save_tensor",
    "summation_points",
]
