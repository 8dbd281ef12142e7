"""Canonical (CP) format for parameter-dependent vectors and matrices."""

from __future__ import annotations

import json
import struct
from pathlib import Path

import numpy as np

from ..grid import ParameterGrid

__all__ = ["CanonicalTensor", "save_tensor", "load_tensor"]

_MAGIC = b"PGDT"
_VERSION = 1


class CanonicalTensor:
    """Separated representation ``sum_m X_m prod_i w^m_i(mu_i)``.

    ``spatial`` has shape ``(M, n, K)`` (``K = 1`` for a primal solution),
    ``factors[i]`` has shape ``(M, #P_i)``.  Instances are immutable: every
    update returns a new tensor.
    """

    def __init__(self, grid, spatial, factors, meta=None):
        if not isinstance(grid, ParameterGrid):
            raise TypeError("grid must be a ParameterGrid")
        spatial = np.asarray(spatial, dtype=float)
        if spatial.ndim != 3:
            raise ValueError("spatial blocks must have shape (M, n, K)")
        rank = spatial.shape[0]
        if len(factors) != grid.p:
            raise ValueError(f"expected {grid.p} factor tables, got {len(factors)}")
        facs = []
        for i, f in enumerate(factors):
            f = np.asarray(f, dtype=float).reshape(rank, grid.shape[i] if rank == 0 else -1)
            if f.shape[1] != grid.shape[i]:
                raise ValueError(
                    f"factor table {i} covers {f.shape[1]} points, axis has {grid.shape[i]}"
                )
            f.setflags(write=False)
            facs.append(f)
        spatial.setflags(write=False)
        self.grid = grid
        self.spatial = spatial
        self.factors = tuple(facs)
        self.meta = dict(meta or {})

    @classmethod
    def zeros(cls, grid, n, k_cols=1):
        return cls(grid, np.zeros((0, n, k_cols)), [np.zeros((0, s)) for s in grid.shape])

    @property
    def rank(self):
        return self.spatial.shape[0]

    @property
    def n(self):
        return self.spatial.shape[1]

    @property
    def k_cols(self):
        return self.spatial.shape[2]

    @property
    def p(self):
        return self.grid.p

    def __repr__(self):
        return f"CanonicalTensor(rank={self.rank}, n={self.n}, K={self.k_cols}, p={self.p})"

    def __len__(self):
        return self.rank

    # -- evaluation -------------------------------------------------------

    def weights(self, points):
        """``(n_points, M)`` products of the parameter factors at grid points."""
        idx = points.index if hasattr(points, "index") else np.atleast_2d(points)
        if idx.shape[1] != self.p:
            raise ValueError(f"points have {idx.shape[1]} axes, tensor has {self.p}")
        out = np.ones((idx.shape[0], self.rank))
        for i, f in enumerate(self.factors):
            out *= f[:, idx[:, i]].T
        return out

    def evaluate_index(self, index):
        """``n x K`` value at the grid point with per-axis indices ``index``."""
        w = self.weights(np.atleast_2d(np.asarray(index, dtype=np.intp)))[0]
        return np.tensordot(w, self.spatial, axes=(0, 0)) if self.rank else np.zeros(
            (self.n, self.k_cols)
        )

    def evaluate(self, mu):
        """``n x K`` value at a grid parameter value ``mu``."""
        mu = np.atleast_1d(np.asarray(mu, dtype=float))
        if mu.size != self.p:
            raise ValueError(f"parameter has {mu.size} entries, tensor has {self.p} axes")
        index = []
        for i, x in enumerate(mu):
            j = self.grid.locate(i, x)
            if j is None:
                raise ValueError(f"mu[{i}]={x} is not a grid point")
            index.append(j)
        return self.evaluate_index(index)

    def evaluate_points(self, points):
        """``(n_points, n, K)`` values (memory grows with the point count)."""
        w = self.weights(points)
        return np.einsum("pm,mnk->pnk", w, self.spatial)

    # -- construction -----------------------------------------------------

    def append(self, block, factors):
        block = np.asarray(block, dtype=float)
        if block.ndim == 1:
            block = block[:, None]
        if self.rank and block.shape != (self.n, self.k_cols):
            raise ValueError(f"block has shape {block.shape}, expected {(self.n, self.k_cols)}")
        spatial = np.concatenate([self.spatial, block[None]], axis=0) if self.rank else block[None]
        facs = [np.vstack([f, np.asarray(g, dtype=float)[None]]) for f, g in zip(self.factors, factors)]
        return CanonicalTensor(self.grid, spatial, facs, self.meta)

    def concat(self, other):
        """Term concatenation; evaluates to the sum of both tensors."""
        if other.grid != self.grid:
            raise ValueError("tensors live on different grids")
        if other.rank == 0:
            return self
        if self.rank == 0:
            return other
        if (other.n, other.k_cols) != (self.n, self.k_cols):
            raise ValueError("tensor shapes differ")
        spatial = np.concatenate([self.spatial, other.spatial])
        facs = [np.vstack([a, b]) for a, b in zip(self.factors, other.factors)]
        return CanonicalTensor(self.grid, spatial, facs, self.meta)

    def truncate(self, rank):
        """The first ``rank`` terms (the greedy iterate of that rank)."""
        rank = max(0, min(rank, self.rank))
        return CanonicalTensor(
            self.grid, self.spatial[:rank], [f[:rank] for f in self.factors], self.meta
        )

    def terms(self, start, stop):
        return CanonicalTensor(
            self.grid, self.spatial[start:stop], [f[start:stop] for f in self.factors], self.meta
        )

    def scale(self, c):
        return CanonicalTensor(self.grid, c * self.spatial, self.factors, self.meta)

    def column(self, i):
        return CanonicalTensor(self.grid, self.spatial[:, :, i : i + 1], self.factors, self.meta)

    # -- io -----------------------------------------------------------------

    def save(self, path):
        save_tensor(self, path)

    @classmethod
    def load(cls, path):
        return load_tensor(path)


def save_tensor(t, path, sidecar=True):
    """Binary container plus an optional JSON metadata sidecar (``<path>.json``).

    Layout: ``PGDT`` magic, ``uint32`` version, five ``uint64`` header fields
    ``(n, p, K, M, 0)``, ``p`` ``uint64`` axis sizes, the ``p`` axis grids, the
    spatial blocks ``(M, n, K)`` and the factor tables, all as little-endian
    float64.
    """
    path = Path(path)
    with open(path, "wb") as fh:
        fh.write(_MAGIC)
        fh.write(struct.pack("<I", _VERSION))
        fh.write(struct.pack("<5Q", t.n, t.p, t.k_cols, t.rank, 0))
        fh.write(struct.pack(f"<{t.p}Q", *t.grid.shape))
        for a in t.grid.axes:
            fh.write(a.astype("<f8").tobytes())
        fh.write(np.ascontiguousarray(t.spatial, dtype="<f8").tobytes())
        for f in t.factors:
            fh.write(np.ascontiguousarray(f, dtype="<f8").tobytes())
    if sidecar:
        meta = {"n": t.n, "p": t.p, "k_cols": t.k_cols, "rank": t.rank}
        meta.update(t.meta)
        with open(str(path) + ".json", "w") as fh:
            json.dump(meta, fh, indent=2, sort_keys=True, default=_jsonable)


def _jsonable(x):
    if isinstance(x, np.ndarray):
        return x.tolist()
    if isinstance(x, np.generic):
        return x.item()
    raise TypeError(f"cannot serialize {type(x)}")


def load_tensor(path):
    path = Path(path)
    buf = path.read_bytes()
    if buf[:4] != _MAGIC:
        raise ValueError(f"{path} is not a tensor container")
    (version,) = struct.unpack_from("<I", buf, 4)
    if version != _VERSION:
        raise ValueError(f"unsupported container version {version}")
    n, p, k, m, _ = struct.unpack_from("<5Q", buf, 8)
    off = 8 + 40
    shape = struct.unpack_from(f"<{p}Q", buf, off)
    off += 8 * p

    def take(count):
        nonlocal off
        out = np.frombuffer(buf, dtype="<f8", count=count, offset=off).astype(float)
        off += 8 * count
        return out

    axes = [take(s) for s in shape]
    spatial = take(m * n * k).reshape(m, n, k)
    factors = [take(m * s).reshape(m, s) for s in shape]
    if off != len(buf):
        raise ValueError(f"{path}: trailing bytes in tensor container")
    meta = {}
    side = Path(str(path) + ".json")
    if side.exists():
        meta = json.loads(side.read_text())
        for key in ("n", "p", "k_cols", "rank"):
            meta.pop(key, None)
    return CanonicalTensor(ParameterGrid(axes), spatial, factors, meta)
