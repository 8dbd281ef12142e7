"""Argument checks shared by the estimator wrappers."""

from __future__ import annotations

import numbers

import numpy as np
from sklearn.utils.validation import check_array

from .linalg import AffineOperator, GramPair

__all__ = [
    "check_operator",
    "check_gram",
    "check_parameters",
    "check_positive_int",
    "check_choice",
]


def check_operator(op):
    if not isinstance(op, AffineOperator):
        raise TypeError(f"expected an AffineOperator, got {type(op).__name__}")
    if op.rhs is None:
        raise ValueError("the operator carries no right-hand side")
    return op


def check_gram(gram, n):
    if gram is None:
        return None
    if not isinstance(gram, GramPair):
        raise TypeError(f"expected a GramPair, got {type(gram).__name__}")
    if gram.n != n:
        raise ValueError(f"Gram matrix has dimension {gram.n}, operator {n}")
    return gram


def check_parameters(X, grid):
    """Grid indices ``(n_samples, p)`` of parameter rows ``X``; off-grid rows raise."""
    X = check_array(X, ensure_2d=False, dtype=float)
    if X.ndim == 1:
        X = X.reshape(-1, 1) if grid.p == 1 else X.reshape(1, -1)
    if X.shape[1] != grid.p:
        raise ValueError(f"X has {X.shape[1]} columns, the grid has {grid.p} axes")
    index = np.empty(X.shape, dtype=np.int64)
    for r, row in enumerate(X):
        for i, x in enumerate(row):
            j = grid.locate(i, x)
            if j is None:
                raise ValueError(f"X[{r}, {i}] = {x} is not a grid value of axis {i}")
            index[r, i] = j
    return index


def check_positive_int(value, name, minimum=1):
    if not isinstance(value, numbers.Integral) or value < minimum:
        raise ValueError(f"{name} must be an integer >= {minimum}, got {value!r}")
    return int(value)


def check_choice(value, name, choices):
    if value not in choices:
        raise ValueError(f"{name} must be one of {tuple(choices)}, got {value!r}")
    return value
