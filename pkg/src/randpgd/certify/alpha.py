"""Dual-quality indicator from known primal increments."""

from __future__ import annotations

import numpy as np

from ..pgd.residual import ResidualExpansion
from ..sketch.estimators import DENOMINATOR_FLOOR, dual_projections

__all__ = ["increment_estimates", "alpha_ratio", "alpha_2k", "alpha_2k_parts"]


def _sqrt_ratio(num2, den2):
    return float(np.sqrt(num2 / den2)) if den2 >= DENOMINATOR_FLOOR else np.inf


def increment_estimates(base, start, y_tilde, op, rhs, s, points):
    """Sketched and dual-estimated relative size of the terms ``start..`` of ``base``.

    With ``d(mu)`` the sum of the terms ``start, ..., rank-1`` of ``base``:

    * exact: ``sqrt(sum (Z_i^T d)^2 / sum (Z_i^T base)^2)``
    * fast: ``sqrt(sum (Y~_i^T A d)^2 / sum (Y~_i^T A base)^2)``

    sums running over points and sketch columns.  Returns ``(exact, fast)``;
    a vanishing denominator gives ``inf``.
    """
    start = max(0, int(start))
    if base.rank == 0:
        return np.inf, np.inf
    zb = s.project(base.spatial[:, :, 0].T)  # (K, M)
    omega = base.weights(points)
    z_all = omega @ zb.T
    z_inc = omega[:, start:] @ zb[:, start:].T
    exact = _sqrt_ratio(float(np.sum(z_inc**2)), float(np.sum(z_all**2)))

    rx = ResidualExpansion(op, rhs, base)
    c = -rx.coefficients(points)
    c[:, : rx.n_rhs] = 0.0  # A(mu) base(mu)
    c_inc = c.copy()
    c_inc[:, rx.n_rhs : rx.n_rhs + start * len(op.matrices)] = 0.0
    den = dual_projections(y_tilde, rx, c, points)
    num = dual_projections(y_tilde, rx, c_inc, points)
    fast = _sqrt_ratio(float(np.sum(num**2)), float(np.sum(den**2)))
    return exact, fast


def alpha_ratio(exact, fast):
    """``max(exact / fast, fast / exact)``; ``inf`` when either vanishes."""
    if not (np.isfinite(exact) and np.isfinite(fast)) or exact <= 0.0 or fast <= 0.0:
        return np.inf
    return float(max(exact / fast, fast / exact))


def alpha_2k_parts(u_m, y_tilde, op, rhs, s, points, k, u_ref=None):
    """``(alpha, exact, fast)`` for the lagged (``u_ref=None``) or lookahead increment.

    Lagged: increment ``u~^M - u~^{M-k}`` against ``u~^M``, where the
    predecessor is the zero tensor while ``M < k``.  Lookahead: ``u_ref`` is
    ``u~^{M+k}`` (sharing its first ``M`` terms with ``u_m``) and the increment
    is ``u~^{M+k} - u~^M`` against ``u~^{M+k}``.
    """
    if k < 1:
        raise ValueError("increment count k must be at least 1")
    if u_ref is None:
        base, start = u_m, u_m.rank - k
    else:
        if u_ref.rank < u_m.rank:
            raise ValueError("lookahead tensor has lower rank than the current one")
        base, start = u_ref, u_m.rank
    exact, fast = increment_estimates(base, start, y_tilde, op, rhs, s, points)
    return alpha_ratio(exact, fast), exact, fast


def alpha_2k(u_m, y_tilde, op, rhs, s, points, k, u_ref=None):
    """Dual-quality indicator ``alpha_{2,k}`` (``>= 1``, ``inf`` when undefined)."""
    return alpha_2k_parts(u_m, y_tilde, op, rhs, s, points, k, u_ref)[0]

