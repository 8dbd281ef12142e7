"""Product parameter grids and finite point sets drawn from them."""

from __future__ import annotations

import itertools
import math
from statistics import NormalDist

import numpy as np

__all__ = [
    "ParameterGrid",
    "PointSet",
    "uniform_axis",
    "quantile_axis",
]

# Materializing more points than this is refused; use ``ParameterGrid.sample``.
MAX_MATERIALIZED = 5_000_000


def uniform_axis(low, high, count):
    """Uniform grid on ``[low, high]`` with both endpoints included."""
    if count < 1:
        raise ValueError("axis must contain at least one point")
    if count == 1:
        return np.array([0.5 * (low + high)])
    return np.linspace(low, high, count)


def quantile_axis(count):
    """Standard-normal quantization by inverse CDF at equal-probability bin midpoints."""
    if count < 1:
        raise ValueError("axis must contain at least one point")
    nd = NormalDist()
    probs = (np.arange(count) + 0.5) / count
    pts = np.array([nd.inv_cdf(float(q)) for q in probs])
    # enforce exact antisymmetry so the median point is exactly 0
    return 0.5 * (pts - pts[::-1])


class ParameterGrid:
    """Cartesian product ``P_1 x ... x P_p`` of finite, sorted axes.

    The cardinality is kept as an exact Python integer so that grids such as
    ``50**20`` can be described without overflow or materialization.
    """

    def __init__(self, axes, ranges=None):
        axes = [np.atleast_1d(np.asarray(a, dtype=float)) for a in axes]
        if not axes:
            raise ValueError("a parameter grid needs at least one axis")
        for i, a in enumerate(axes):
            if a.ndim != 1 or a.size == 0:
                raise ValueError(f"axis {i} is empty")
            if a.size > 1 and np.any(np.diff(a) <= 0):
                raise ValueError(f"axis {i} must be strictly increasing")
        self.axes = tuple(axes)
        if ranges is None:
            ranges = [(float(a[0]), float(a[-1])) for a in axes]
        self.ranges = tuple((float(lo), float(hi)) for lo, hi in ranges)

    @property
    def p(self):
        return len(self.axes)

    @property
    def shape(self):
        return tuple(a.size for a in self.axes)

    @property
    def cardinality(self):
        return math.prod(self.shape)

    @property
    def log_cardinality(self):
        return float(sum(math.log(s) for s in self.shape))

    def __repr__(self):
        return f"ParameterGrid(shape={self.shape}, cardinality={self.cardinality})"

    def __eq__(self, other):
        return (
            isinstance(other, ParameterGrid)
            and self.shape == other.shape
            and all(np.array_equal(a, b) for a, b in zip(self.axes, other.axes))
        )

    def __hash__(self):
        return hash(self.shape)

    def iter_points(self):
        """Lazily iterate over parameter tuples in C (last axis fastest) order."""
        return itertools.product(*(a.tolist() for a in self.axes))

    def full(self):
        """All grid points as a :class:`PointSet` (refuses intractable grids)."""
        if self.cardinality > MAX_MATERIALIZED:
            raise ValueError(
                f"grid has {self.cardinality} points; use sample() instead"
            )
        idx = np.indices(self.shape).reshape(self.p, -1).T
        return PointSet(self, idx)

    def sample(self, count, seed=0):
        """Seeded uniform subsample (with replacement) of grid points."""
        rng = np.random.default_rng(seed)
        idx = np.column_stack([rng.integers(0, s, size=count) for s in self.shape])
        return PointSet(self, idx)

    def locate(self, axis, value, atol=1e-12):
        """Index of ``value`` on ``axis`` or ``None`` when it is off-grid."""
        a = self.axes[axis]
        j = int(np.argmin(np.abs(a - value)))
        if abs(a[j] - value) <= atol * max(1.0, abs(value)):
            return j
        return None

    def points(self, count=None, seed=0):
        """Full grid when small enough, otherwise a subsample of ``count`` points."""
        if count is None or self.cardinality <= count:
            return self.full()
        return self.sample(count, seed=seed)


class PointSet:
    """Finite list of grid points, stored as per-axis indices (``n_points x p``)."""

    def __init__(self, grid, index):
        index = np.asarray(index, dtype=np.intp)
        if index.ndim != 2 or index.shape[1] != grid.p:
            raise ValueError("index array must have shape (n_points, p)")
        for i, s in enumerate(grid.shape):
            if index.size and (index[:, i].min() < 0 or index[:, i].max() >= s):
                raise ValueError(f"index out of range on axis {i}")
        self.grid = grid
        self.index = index

    def __len__(self):
        return self.index.shape[0]

    @property
    def values(self):
        return np.column_stack(
            [self.grid.axes[i][self.index[:, i]] for i in range(self.grid.p)]
        )

    def subset(self, rows):
        return PointSet(self.grid, self.index[np.asarray(rows)])

    def __iter__(self):
        return iter(self.index)
