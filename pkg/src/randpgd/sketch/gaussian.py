"""Covariance specifications and reproducible Gaussian sketches."""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np
import scipy.sparse as sp

from ..linalg import FactorizationError, as_sparse, factorize, is_symmetric

__all__ = [
    "RNG_ID",
    "SigmaSpec",
    "GaussianSketch",
    "standard_normal_column",
    "draw_sketch",
    "estimate_norm",
    "save_sketch",
    "load_sketch",
]

RNG_ID = "philox4x64-boxmuller-v1"
VARIANTS = ("gram_natural", "l2", "qoi", "scalar_qoi")
_MASK = (1 << 64) - 1


class _Streams:
    """Philox4x64 keyed by ``(seed, column)``; one bit generator reset per column."""

    def __init__(self):
        self._bitgen = np.random.Philox(key=np.zeros(2, dtype=np.uint64))
        # the state setter copies, so one template serves every reset
        self._state = {
            "bit_generator": "Philox",
            "state": {
                "counter": np.zeros(4, dtype=np.uint64),
                "key": np.zeros(2, dtype=np.uint64),
            },
            "buffer": np.zeros(4, dtype=np.uint64),
            "buffer_pos": 4,
            "has_uint32": 0,
            "uinteger": 0,
        }

    def _reset(self, seed, column):
        self._state["state"]["key"][:] = (seed & _MASK, column & _MASK)
        self._bitgen.state = self._state

    def raw(self, seed, column, count):
        self._reset(seed, column)
        return self._bitgen.random_raw(count)

    def uniforms(self, seed, column, count):
        return (self.raw(seed, column, count) >> np.uint64(11)).astype(float) * 2.0**-53

    def normals(self, seed, column, size):
        return self.normal_block(seed, [column], size)[:, 0]

    def normal_block(self, seed, columns, size):
        """Columns ``(size, len(columns))``; Box-Muller applied to all columns at once."""
        if seed < 0 or min(columns, default=0) < 0:
            raise ValueError("seed and column must be nonnegative")
        half = (size + 1) // 2
        columns = list(columns)
        bits = np.empty((len(columns), 2 * half), dtype=np.uint64)
        for j, c in enumerate(columns):
            self._reset(seed, c)
            bits[j] = self._bitgen.random_raw(2 * half)
        u = (bits >> np.uint64(11)).astype(float)
        u *= 2.0**-53
        u1, u2 = 1.0 - u[:, :half], u[:, half:]  # u1 in (0, 1]
        r = np.sqrt(-2.0 * np.log(u1))
        u2 *= 2.0 * np.pi
        z = np.empty((len(columns), 2 * half))
        np.multiply(r, np.cos(u2), out=z[:, :half])
        np.multiply(r, np.sin(u2), out=z[:, half:])
        return z[:, :size].T


def standard_normal_column(seed, column, size):
    """``size`` standard normals of stream ``(seed, column)``.

    A Philox counter-based generator keyed by ``(seed, column)`` feeds a
    Box-Muller transform, so every column is reproducible in isolation.
    """
    return _Streams().normals(int(seed), int(column), int(size))


@dataclass(frozen=True)
class SigmaSpec:
    """Covariance ``Sigma`` of the sketch vectors.

    Variants
    --------
    gram_natural
        ``Sigma = R_X`` (``matrix``), any SPD matrix.
    l2
        ``Sigma = R_L2`` (``matrix``, a mass matrix).
    qoi
        ``Sigma = L^T R_W L`` with extractor ``extractor`` (m x n) and SPD
        weight ``weight`` (m x m).
    scalar_qoi
        ``Sigma = l l^T`` with ``vector`` ``l``.
    """

    variant: str
    matrix: object = None
    extractor: object = None
    weight: object = None
    vector: object = None

    def __post_init__(self):
        if self.variant not in VARIANTS:
            raise ValueError(f"unknown Sigma variant {self.variant!r}; expected {VARIANTS}")
        need = {
            "gram_natural": ("matrix",),
            "l2": ("matrix",),
            "qoi": ("extractor", "weight"),
            "scalar_qoi": ("vector",),
        }[self.variant]
        for name in need:
            if getattr(self, name) is None:
                raise ValueError(f"variant {self.variant} needs '{name}'")

    @classmethod
    def identity(cls, n):
        return cls("gram_natural", matrix=sp.identity(n, format="csc"))

    @classmethod
    def gram(cls, gram_pair):
        return cls("gram_natural", matrix=gram_pair.r_x)

    @property
    def n(self):
        if self.variant in ("gram_natural", "l2"):
            return self.matrix.shape[0]
        if self.variant == "qoi":
            return self.extractor.shape[1]
        return np.asarray(self.vector).size

    def factor(self):
        """``U`` with ``Sigma = U^T U`` (sparse or dense, ``m x n``); computed once."""
        u = self.__dict__.get("_factor")
        if u is None:
            u = self._compute_factor()
            object.__setattr__(self, "_factor", u)
        return u

    def _compute_factor(self):
        if self.variant in ("gram_natural", "l2"):
            m = as_sparse(self.matrix)
            if not is_symmetric(m):
                raise ValueError("Sigma must be symmetric")
            try:
                return factorize(m, "cholesky").sqrt_factor()
            except FactorizationError as exc:
                raise ValueError(f"Sigma is not positive definite: {exc}")
        if self.variant == "qoi":
            w = self.weight.toarray() if sp.issparse(self.weight) else np.asarray(self.weight, float)
            if not np.allclose(w, w.T, rtol=1e-12, atol=0.0):
                raise ValueError("R_W must be symmetric")
            try:
                c = np.linalg.cholesky(w)  # w = c c^T
            except np.linalg.LinAlgError:
                raise ValueError("R_W is not positive definite")
            ext = as_sparse(self.extractor)
            if ext.shape[0] != w.shape[0]:
                raise ValueError("extractor and weight sizes differ")
            return np.asarray((ext.T @ c).T)
        l = np.asarray(self.vector, dtype=float).ravel()
        return l[None, :]

    def matvec_norm2(self, v, u=None):
        """``||v||_Sigma^2`` columnwise."""
        u = self.factor() if u is None else u
        uv = u @ v
        return np.sum(np.asarray(uv) ** 2, axis=0)

    def descriptor(self):
        h = hashlib.sha256(self.variant.encode())
        for name in ("matrix", "extractor", "weight", "vector"):
            x = getattr(self, name)
            if x is None:
                continue
            if sp.issparse(x):
                x = as_sparse(x)
                h.update(x.indptr.tobytes())
                h.update(x.indices.tobytes())
                h.update(x.data.tobytes())
            else:
                h.update(np.ascontiguousarray(x, dtype=float).tobytes())
        return {"variant": self.variant, "n": int(self.n), "sha256": h.hexdigest()}


@dataclass(frozen=True)
class GaussianSketch:
    """``K`` vectors ``Z_i = U^T zhat_i`` drawn from ``N(0, Sigma)``."""

    k: int
    z_block: np.ndarray
    u_factor: object
    seed: int
    rng_id: str
    sigma: SigmaSpec

    @property
    def n(self):
        return self.z_block.shape[0]

    def project(self, v):
        """``Z^T v`` (``K`` values per column of ``v``)."""
        v = np.asarray(v, dtype=float)
        if v.shape[0] != self.n:
            raise ValueError(f"vector has length {v.shape[0]}, sketch dimension is {self.n}")
        return self.z_block.T @ v

    def estimate_norm(self, v):
        return estimate_norm(self, v)

    def column(self, i):
        return self.z_block[:, i]

    def with_columns(self, k):
        """Sketch restricted to its first ``k`` columns (same streams)."""
        return GaussianSketch(k, self.z_block[:, :k], self.u_factor, self.seed, self.rng_id, self.sigma)


def draw_sketch(sigma, k, seed):
    """Draw ``K`` Gaussian vectors with covariance ``Sigma``, deterministic in ``seed``."""
    if k < 1:
        raise ValueError("sketch needs at least one vector")
    u = sigma.factor()
    m = u.shape[0]
    zhat = _Streams().normal_block(int(seed), range(k), m)
    z = np.asarray(u.T @ zhat)
    return GaussianSketch(int(k), z, u, int(seed), RNG_ID, sigma)


def estimate_norm(s, v):
    """``||Phi v||_2 = sqrt(mean_i (Z_i^T v)^2)`` (columnwise for 2-D input)."""
    proj = s.project(v)
    return np.sqrt(np.mean(proj * proj, axis=0))


def save_sketch(s, path):
    """JSON record (seed, rng id, K and a Sigma fingerprint); vectors are redrawn on load."""
    rec = {"k": s.k, "seed": s.seed, "rng_id": s.rng_id, "sigma": s.sigma.descriptor()}
    Path(path).write_text(json.dumps(rec, indent=2, sort_keys=True) + "\n")


def load_sketch(path, sigma):
    rec = json.loads(Path(path).read_text())
    if rec.get("rng_id") != RNG_ID:
        raise ValueError(f"unsupported generator {rec.get('rng_id')!r}")
    if rec["sigma"] != sigma.descriptor():
        raise ValueError("covariance does not match the recorded fingerprint")
    return draw_sketch(sigma, rec["k"], rec["seed"])
