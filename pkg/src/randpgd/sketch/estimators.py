"""Randomized error estimators: sketched true errors and dual-based residual forms."""

from __future__ import annotations

import csv
import io
from dataclasses import dataclass, field

import numpy as np

from ..linalg import factorize
from ..pgd.residual import ResidualExpansion
from ..pgd.tensor import CanonicalTensor

__all__ = [
    "DENOMINATOR_FLOOR",
    "EstimateBundle",
    "ExactDual",
    "exact_estimators",
    "fast_estimators",
    "dual_projections",
    "sketch_tensor_projections",
]

DENOMINATOR_FLOOR = 1e-300


@dataclass
class EstimateBundle:
    """Per-point and RMS estimates with their raw sums of squares.

    ``num2`` and ``den2`` hold ``mean_i (.)^2`` of the numerator and
    denominator projections at every point; ``flagged`` marks points whose
    denominator fell below ``DENOMINATOR_FLOOR`` (relative value ``inf``).
    """

    points: object
    delta: np.ndarray
    delta_rel: np.ndarray
    rms: float
    rms_rel: float
    k: int
    seed: int
    kind: str
    num2: np.ndarray = None
    den2: np.ndarray = None
    flagged: np.ndarray = None
    meta: dict = field(default_factory=dict)

    @property
    def per_mu(self):
        return {
            tuple(v): (d, r) for v, d, r in zip(self.points.values, self.delta, self.delta_rel)
        }

    def summary(self):
        return {
            "kind": self.kind,
            "k": int(self.k),
            "seed": int(self.seed),
            "n_points": int(len(self.delta)),
            "rms": float(self.rms),
            "rms_rel": float(self.rms_rel),
            "flagged": int(np.count_nonzero(self.flagged)) if self.flagged is not None else 0,
            **self.meta,
        }

    def to_csv(self, extra=None):
        """CSV text: parameter coordinates, estimates and optional extra columns."""
        values = self.points.values
        cols = [f"mu{i}" for i in range(values.shape[1])] + ["delta", "delta_rel"]
        extra = extra or {}
        cols += list(extra)
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(cols)
        for j in range(values.shape[0]):
            row = [repr(float(x)) for x in values[j]]
            row += [repr(float(self.delta[j])), repr(float(self.delta_rel[j]))]
            row += [repr(float(extra[c][j])) for c in extra]
            w.writerow(row)
        return buf.getvalue()


def _bundle(points, num2, den2, s, kind, meta=None):
    num2 = np.asarray(num2, dtype=float)
    den2 = np.asarray(den2, dtype=float)
    delta = np.sqrt(num2)
    flagged = den2 < DENOMINATOR_FLOOR
    with np.errstate(divide="ignore", invalid="ignore"):
        rel = np.where(flagged, np.inf, delta / np.sqrt(np.where(flagged, 1.0, den2)))
    rms = float(np.sqrt(np.mean(num2))) if num2.size else 0.0
    tot = float(np.sum(den2))
    rms_rel = float(np.sqrt(np.sum(num2) / tot)) if tot >= DENOMINATOR_FLOOR else np.inf
    return EstimateBundle(
        points, delta, rel, rms, rms_rel, s.k, s.seed, kind, num2, den2, flagged, dict(meta or {})
    )


def sketch_tensor_projections(s, t, points):
    """``Z^T t(mu)`` at every point, shape ``(n_points, K)``, for a primal tensor ``t``."""
    if t.k_cols != 1:
        raise ValueError("sketch projections need a single-column tensor")
    if t.rank == 0:
        return np.zeros((len(points), s.k))
    zt = s.project(t.spatial[:, :, 0].T)  # (K, M)
    return t.weights(points) @ zt.T


def exact_estimators(u_true, u_tilde, s, points):
    """Sketch of the true error, ``Delta(mu) = ||Phi (u(mu) - u_tilde(mu))||_2``.

    Parameters
    ----------
    u_true : array (n_points, n)
        Reference solutions at ``points``.
    u_tilde : CanonicalTensor
    s : GaussianSketch
    points : PointSet

    Notes
    -----
    The relative denominator is ``mean_i (Z_i^T u(mu))^2``, which equals the
    exact-dual form ``mean_i (Y_i(mu)^T f(mu))^2``.
    """
    if u_true is None:
        raise ValueError("reference solutions are required")
    u_true = np.asarray(u_true, dtype=float)
    if u_true.ndim != 2 or u_true.shape[0] != len(points):
        raise ValueError(f"expected reference solutions of shape ({len(points)}, n)")
    zu = u_true @ s.z_block  # (P, K)
    zt = sketch_tensor_projections(s, u_tilde, points)
    diff = zu - zt
    return _bundle(
        points, np.mean(diff * diff, axis=1), np.mean(zu * zu, axis=1), s, "exact"
    )


class ExactDual:
    """Per-point exact dual solutions ``A(mu)^T Y(mu) = Z`` (small problems only)."""

    def __init__(self, op, s):
        self.op = op
        self.s = s
        self._cache = {}

    @property
    def k_cols(self):
        return self.s.k

    def at_index(self, index):
        key = tuple(int(i) for i in index)
        y = self._cache.get(key)
        if y is None:
            fac = factorize(self.op.assemble_index(key), "lu")
            y = fac.solve_transpose(np.asfortranarray(self.s.z_block))
            self._cache[key] = y
        return y


def dual_projections(y_tilde, expansion, coefficients, points):
    """``Y(mu)^T v(mu)`` with ``v(mu) = sum_a coefficients[:, a] R_a``.

    Returns an array of shape ``(n_points, K)``.
    """
    atoms = expansion.atoms[:, :, 0]  # (A, n)
    if isinstance(y_tilde, ExactDual):
        out = np.empty((len(points), y_tilde.k_cols))
        for j, index in enumerate(points.index):
            v = coefficients[j] @ atoms
            out[j] = y_tilde.at_index(index).T @ v
        return out
    if not isinstance(y_tilde, CanonicalTensor):
        raise TypeError("dual approximation must be a CanonicalTensor or ExactDual")
    if y_tilde.rank == 0:
        return np.zeros((len(points), y_tilde.k_cols))
    t = np.einsum("lnk,an->lak", y_tilde.spatial, atoms)  # (L, A, K)
    nu = y_tilde.weights(points)  # (P, L)
    return np.einsum("pl,pa,lak->pk", nu, coefficients, t)


def fast_estimators(op, rhs, u_tilde, y_tilde, s, points, expansion=None):
    """Dual-based estimators ``Delta~(mu) = sqrt(mean_i (Y~_i(mu)^T r(mu))^2)``.

    The relative variant divides by ``mean_i (Y~_i(mu)^T f(mu))^2``; RMS forms
    pool numerator and denominator over the points.  ``y_tilde`` may be an
    :class:`ExactDual`, in which case ``Delta~`` coincides with the sketched
    true error.
    """
    if y_tilde.k_cols != s.k:
        raise ValueError(f"dual approximation has {y_tilde.k_cols} columns, sketch has {s.k}")
    if expansion is None:
        expansion = ResidualExpansion(op, rhs, u_tilde)
    c = expansion.coefficients(points)
    num = dual_projections(y_tilde, expansion, c, points)
    cf = np.zeros_like(c)
    cf[:, : expansion.n_rhs] = c[:, : expansion.n_rhs]
    den = dual_projections(y_tilde, expansion, cf, points)
    meta = {"dual_rank": int(getattr(y_tilde, "rank", -1))}
    return _bundle(
        points, np.mean(num * num, axis=1), np.mean(den * den, axis=1), s, "fast", meta
    )

