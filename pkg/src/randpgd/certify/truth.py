"""Reference solutions by per-point direct solves and exact error curves."""

from __future__ import annotations

import hashlib
import os
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from ..linalg import factorize
from ..pgd.greedy import _as_rhs

__all__ = ["CACHE_ENV", "truth_solutions", "TrueErrors", "true_errors"]

CACHE_ENV = "RANDPGD_CACHE_DIR"


def _cache_key(op, rhs, points):
    h = hashlib.sha256(op.digest().encode())
    h.update(rhs.digest().encode())
    h.update(np.ascontiguousarray(points.index, dtype=np.int64).tobytes())
    return h.hexdigest()


def truth_solutions(op, rhs=None, points=None, cache_dir=None):
    """Solutions ``u(mu)`` at every point, shape ``(n_points, n)``.

    Each point costs one sparse LU factorization.  With ``cache_dir`` (or the
    ``RANDPGD_CACHE_DIR`` environment variable) set, results are stored as
    ``.npy`` files keyed by a hash of the problem and the point indices.
    """
    rhs = _as_rhs(rhs, op)
    if rhs.k_cols != 1:
        raise ValueError("reference solutions need a single right-hand side")
    points = op.grid.full() if points is None else points
    cache_dir = cache_dir if cache_dir is not None else os.environ.get(CACHE_ENV)
    path = None
    if cache_dir:
        path = Path(cache_dir) / f"truth-{_cache_key(op, rhs, points)[:32]}.npy"
        if path.exists():
            u = np.load(path)
            if u.shape == (len(points), op.n):
                return u
    u = np.empty((len(points), op.n))
    f = rhs.evaluate(points)[:, :, 0]
    for j, index in enumerate(points.index):
        u[j] = factorize(op.assemble_index(index), "lu").solve(f[j])
    if path is not None:
        path.parent.mkdir(parents=True, exist_ok=True)
        tmp = path.with_suffix(".tmp.npy")
        np.save(tmp, u)
        os.replace(tmp, path)
    return u


@dataclass
class TrueErrors:
    """Exact errors of every prefix ``u~^M`` of a tensor.

    ``rms_rel[M]`` is the relative RMS error of the rank-``M`` prefix
    (``M = 0 .. rank``); ``per_mu_rel`` and ``per_mu`` refer to the full tensor.
    """

    rms_rel: np.ndarray
    rms: np.ndarray
    per_mu: np.ndarray
    per_mu_rel: np.ndarray
    sq_norms: np.ndarray


def true_errors(truth, tensor, gram=None, points=None):
    """Exact ``||u(mu) - u~^M(mu)||`` for all prefixes in the ``R_X`` (or Euclidean) norm.

    Uses reduced quantities only: ``u^T R U^m``, ``U^m^T R U^l`` and the
    parameter factors, so the cost is independent of the number of prefixes.
    """
    if tensor.k_cols != 1:
        raise ValueError("true errors need a single-column tensor")
    points = tensor.grid.full() if points is None else points
    truth = np.asarray(truth, dtype=float)
    if truth.shape != (len(points), tensor.n):
        raise ValueError(f"expected reference solutions of shape ({len(points)}, {tensor.n})")
    s = tensor.spatial[:, :, 0].T  # (n, M)
    if gram is None:
        rs, ru = s, truth
    else:
        rs = np.asarray(gram.r_x @ s)
        ru = np.asarray((gram.r_x @ truth.T).T)
    u2 = np.sum(truth * ru, axis=1)
    omega = tensor.weights(points)  # (P, M)
    cross = omega * (truth @ rs)  # (P, M)
    g = s.T @ rs
    # quadratic increments: 2 w_M sum_{m<M} w_m G_mM + w_M^2 G_MM
    upper = omega @ np.triu(g, 1)
    quad = 2.0 * omega * upper + omega**2 * np.diag(g)[None, :]
    e2 = u2[:, None] - 2.0 * np.cumsum(cross, axis=1) + np.cumsum(quad, axis=1)
    e2 = np.maximum(np.hstack([u2[:, None], e2]), 0.0)  # (P, M+1)
    tot = float(np.sum(u2))
    rms = np.sqrt(np.mean(e2, axis=0))
    rms_rel = np.sqrt(np.sum(e2, axis=0) / tot) if tot > 0 else np.full(e2.shape[1], np.inf)
    per_mu = np.sqrt(e2[:, -1])
    with np.errstate(divide="ignore", invalid="ignore"):
        per_mu_rel = np.where(u2 > 0, per_mu / np.sqrt(np.maximum(u2, 0.0)), np.inf)
    return TrueErrors(rms_rel, rms, per_mu, per_mu_rel, u2)
