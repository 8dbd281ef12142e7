"""Classical error indicators: stagnation, residual norm and the condition oracle."""

from __future__ import annotations

import numpy as np
import scipy.linalg as sla

from ..pgd.residual import ResidualExpansion
from ..sketch.estimators import DENOMINATOR_FLOOR

__all__ = [
    "MODES",
    "SingularOperatorError",
    "stagnation_estimator",
    "residual_estimator",
    "condition_profile",
    "kappa_oracle",
]

MODES = ("per_mu", "rms")
DENSE_LIMIT = 200


class SingularOperatorError(ArithmeticError):
    """``A(mu)`` is numerically singular at ``mu``."""

    def __init__(self, mu, ratio):
        self.mu = tuple(float(x) for x in mu)
        self.ratio = ratio
        super().__init__(f"A(mu) is singular at mu={self.mu} (smin/smax={ratio:.3e})")


def _check_mode(mode):
    if mode not in MODES:
        raise ValueError(f"mode must be one of {MODES}, got {mode!r}")


def _ratio(num2, den2, mode):
    if mode == "rms":
        tot = float(np.sum(den2))
        return float(np.sqrt(np.sum(num2) / tot)) if tot >= DENOMINATOR_FLOOR else np.inf
    flagged = den2 < DENOMINATOR_FLOOR
    with np.errstate(divide="ignore", invalid="ignore"):
        return np.where(flagged, np.inf, np.sqrt(num2 / np.where(flagged, 1.0, den2)))


def _block_root(blocks, gram):
    """Triangular factor of the ``R_X`` Gram matrix of blocks ``(T, n, K)`` via QR."""
    flat = blocks.transpose(1, 2, 0)  # (n, K, T)
    if gram is not None:
        n, k, t = flat.shape
        s = gram.r_x_chol.sqrt_factor()
        flat = np.asarray(s @ flat.reshape(n, k * t)).reshape(-1, k, t)
    return np.linalg.qr(flat.reshape(-1, blocks.shape[0]), mode="r")


def stagnation_estimator(u_m, u_mk, gram=None, points=None, mode="rms"):
    """``||u~^{M+k} - u~^M|| / ||u~^{M+k}||`` in the ``R_X`` norm.

    Parameters
    ----------
    u_m, u_mk : CanonicalTensor
        Coarse and enriched approximations, ``rank(u_mk) >= rank(u_m)``.
    gram : GramPair, optional
        Euclidean norm when omitted.
    points : PointSet, optional
        Defaults to the full grid.
    mode : {"per_mu", "rms"}

    Returns
    -------
    ndarray or float
        Per-point ratios (``inf`` where ``u~^{M+k}(mu) = 0``) or the RMS ratio.
    """
    _check_mode(mode)
    if u_mk.rank < u_m.rank:
        raise ValueError(f"enriched tensor has rank {u_mk.rank} < {u_m.rank}")
    if u_m.n != u_mk.n or u_m.k_cols != u_mk.k_cols or u_m.grid != u_mk.grid:
        raise ValueError("tensors belong to different problems")
    points = u_mk.grid.full() if points is None else points
    if u_mk.rank == 0:
        zero = np.zeros(len(points))
        return _ratio(zero, zero, mode)
    c = _shared_prefix(u_m, u_mk)
    r = u_mk.rank
    blocks = np.concatenate([u_mk.spatial, u_m.spatial[c:]])
    root = _block_root(blocks, gram)
    wk = u_mk.weights(points)
    den2 = np.sum((wk @ root[:r, :r].T) ** 2, axis=1)
    w = np.hstack([np.zeros((len(points), c)), wk[:, c:], -u_m.weights(points)[:, c:]])
    num2 = np.sum((w @ root.T) ** 2, axis=1)
    return _ratio(num2, den2, mode)


def _shared_prefix(u_m, u_mk):
    """Number of leading terms the two tensors share (greedy iterates share all of ``u_m``)."""
    c = 0
    while c < u_m.rank and np.array_equal(u_m.spatial[c], u_mk.spatial[c]) and all(
        np.array_equal(a[c], b[c]) for a, b in zip(u_m.factors, u_mk.factors)
    ):
        c += 1
    return c


def residual_estimator(op, rhs, u_m, gram=None, points=None, mode="rms"):
    """Relative residual ``||A(mu) u~(mu) - f(mu)||_{X'} / ||f(mu)||_{X'}``.

    The dual norm is ``sqrt(r^T R_X^{-1} r)`` (Euclidean without ``gram``);
    ``rms`` pools numerator and denominator over the points.
    """
    _check_mode(mode)
    points = op.grid.full() if points is None else points
    rx = ResidualExpansion(op, rhs, u_m)
    root = rx.root(gram)
    num2 = rx.sq_norms(points, root=root)
    cf = rx.rhs_coefficients(points)
    den2 = np.sum((cf @ root.T) ** 2, axis=1)
    if float(np.sum(den2)) < DENOMINATOR_FLOOR:
        raise ValueError("right-hand side has zero dual norm on the points")
    return _ratio(num2, den2, mode)


def condition_profile(op, gram=None, points=None):
    """Extreme singular values ``(beta(mu), gamma(mu))`` of ``R^{-1/2} A(mu) R^{-1/2}``.

    Dense computation; intended for ``n <= 200``.
    """
    if op.n > DENSE_LIMIT:
        raise ValueError(f"dense condition oracle limited to n <= {DENSE_LIMIT}, got n={op.n}")
    points = op.grid.full() if points is None else points
    if gram is None:
        r_isqrt = np.eye(op.n)
    else:
        lam, v = sla.eigh(gram.r_x.toarray())
        r_isqrt = (v / np.sqrt(lam)) @ v.T
    beta = np.empty(len(points))
    gamma = np.empty(len(points))
    values = points.values
    for j, index in enumerate(points.index):
        a = op.assemble_index(index).toarray()
        s = sla.svd(r_isqrt @ a @ r_isqrt, compute_uv=False)
        if s[0] == 0.0 or s[-1] <= 1e-14 * s[0]:
            raise SingularOperatorError(values[j], s[-1] / s[0] if s[0] else 0.0)
        beta[j], gamma[j] = s[-1], s[0]
    return beta, gamma


def kappa_oracle(op, gram=None, points=None):
    """``kappa_N = max_mu gamma(mu) / beta(mu)`` over the points (dense SVD)."""
    beta, gamma = condition_profile(op, gram, points)
    return float(np.max(gamma / beta))
