"""Sparse matrices, factorizations, Gram norms and affine parametrized operators.

Matrices are stored as canonical ``scipy.sparse.csc_matrix`` (sorted indices,
no duplicates).  Factorizations wrap SuperLU: the Cholesky kind runs it in
symmetric mode without pivoting, which yields ``P^T L D L^T P`` and exposes a
sparse square-root factor.
"""

from __future__ import annotations

import hashlib
from dataclasses import dataclass, field

import numpy as np
import scipy.io
import scipy.sparse as sp
import scipy.sparse.linalg as sla

from .grid import ParameterGrid

__all__ = [
    "as_sparse",
    "is_symmetric",
    "Factorization",
    "FactorizationError",
    "factorize",
    "solve_block",
    "AffineRHS",
    "AffineOperator",
    "MatrixCombination",
    "affine_assemble",
    "GramPair",
    "xnorm",
    "dual_norm",
    "read_mtx",
    "write_mtx",
    "read_vector",
    "write_vector",
]


class FactorizationError(ArithmeticError):
    """Raised for singular or (under ``kind='cholesky'``) non-SPD matrices."""


def as_sparse(m):
    """Canonical CSC copy: float64, duplicates summed, indices sorted."""
    if sp.issparse(m):
        out = sp.csc_matrix(m, dtype=float, copy=True)
    else:
        out = sp.csc_matrix(np.atleast_2d(np.asarray(m, dtype=float)))
    out.sum_duplicates()
    out.sort_indices()
    return out


def is_symmetric(m, rtol=1e-12):
    m = as_sparse(m)
    if m.shape[0] != m.shape[1]:
        return False
    if m.nnz == 0:
        return True
    scale = np.abs(m.data).max()
    diff = m - m.T
    return diff.nnz == 0 or np.abs(diff.data).max() <= rtol * scale


class Factorization:
    """LU or LDL^T factors of a sparse square matrix, reusable for many RHS."""

    def __init__(self, m, kind="lu"):
        if kind not in ("lu", "cholesky"):
            raise ValueError(f"unknown factorization kind {kind!r}")
        m = as_sparse(m)
        if m.shape[0] != m.shape[1]:
            raise ValueError(f"matrix must be square, got {m.shape}")
        self.kind = kind
        self.n = m.shape[0]
        if self.n == 0:
            raise ValueError("empty matrix")
        try:
            if kind == "cholesky":
                lu = sla.splu(
                    m,
                    permc_spec="MMD_AT_PLUS_A",
                    diag_pivot_thresh=0.0,
                    options=dict(SymmetricMode=True),
                )
            else:
                lu = sla.splu(m, permc_spec="COLAMD")
        except RuntimeError as exc:
            raise FactorizationError(f"structurally or numerically singular: {exc}")
        diag = lu.U.diagonal()
        if not np.all(np.isfinite(diag)) or np.any(diag == 0.0):
            raise FactorizationError("singular matrix (zero pivot)")
        if kind == "cholesky":
            if not np.array_equal(lu.perm_r, lu.perm_c):
                raise FactorizationError("symmetric ordering lost; matrix is not SPD")
            if np.any(diag <= 0.0):
                raise FactorizationError("non-positive pivot; matrix is not SPD")
        self._lu = lu
        self._sqrt = None

    def solve(self, b):
        b = np.asarray(b, dtype=float)
        if b.shape[0] != self.n:
            raise ValueError(f"rhs has {b.shape[0]} rows, expected {self.n}")
        return self._lu.solve(b)

    def solve_transpose(self, b):
        b = np.asarray(b, dtype=float)
        if b.shape[0] != self.n:
            raise ValueError(f"rhs has {b.shape[0]} rows, expected {self.n}")
        return self._lu.solve(b, trans="T")

    def sqrt_factor(self):
        """Sparse ``U`` with ``m = U^T U`` (Cholesky kind only)."""
        if self.kind != "cholesky":
            raise ValueError("square-root factor requires a Cholesky factorization")
        if self._sqrt is None:
            lu = self._lu
            d = np.sqrt(lu.U.diagonal())
            perm = sp.csc_matrix(
                (np.ones(self.n), (lu.perm_r, np.arange(self.n))), shape=(self.n,) * 2
            )
            self._sqrt = as_sparse(sp.diags(d) @ lu.L.T @ perm)
        return self._sqrt

    def whiten(self, b):
        """``S^{-T} b`` for the square-root factor ``S``, so ``||whiten(b)||^2 = b^T m^{-1} b``."""
        if self.kind != "cholesky":
            raise ValueError("whitening requires a Cholesky factorization")
        b = np.asarray(b, dtype=float)
        if b.shape[0] != self.n:
            raise ValueError(f"rhs has {b.shape[0]} rows, expected {self.n}")
        lu = self._lu
        pb = np.empty_like(b)
        pb[lu.perm_r] = b
        y = sla.spsolve_triangular(lu.L.tocsr(), pb, lower=True, unit_diagonal=True)
        d = np.sqrt(lu.U.diagonal())
        return y / (d[:, None] if y.ndim == 2 else d)

    def logdet(self):
        return float(np.sum(np.log(np.abs(self._lu.U.diagonal()))))


def factorize(m, kind="lu"):
    return Factorization(m, kind)


def solve_block(f, rhs):
    """Solve for all columns of ``rhs`` against one factorization."""
    rhs = np.asarray(rhs, dtype=float)
    if rhs.ndim == 1:
        return f.solve(rhs)
    if rhs.shape[0] != f.n:
        raise ValueError(f"rhs has {rhs.shape[0]} rows, expected {f.n}")
    return f.solve(np.asfortranarray(rhs))


# ---------------------------------------------------------------------------
# Separable coefficient tables shared by operators and right-hand sides.


def _axis_table(factor, axis_values, axis, term):
    if factor is None:
        return np.ones(axis_values.size)
    if callable(factor):
        vals = np.asarray(factor(axis_values), dtype=float)
        if vals.shape == ():
            vals = np.full(axis_values.size, float(vals))
    else:
        vals = np.asarray(factor, dtype=float)
    if vals.shape != axis_values.shape:
        raise ValueError(
            f"term {term}: coefficient table on axis {axis} has shape {vals.shape}, "
            f"expected {axis_values.shape}"
        )
    return vals


class _Separable:
    """Sum of fixed items times products of univariate coefficient factors."""

    def __init__(self, items, coefficients, grid):
        if not isinstance(grid, ParameterGrid):
            raise TypeError("grid must be a ParameterGrid")
        if coefficients is None:
            coefficients = [[None] * grid.p for _ in items]
        if len(coefficients) != len(items):
            raise ValueError("need one coefficient row per term")
        self.grid = grid
        self.factors = []
        for q, row in enumerate(coefficients):
            row = list(row) if row is not None else [None] * grid.p
            if len(row) != grid.p:
                raise ValueError(
                    f"term {q} has {len(row)} coefficient factors, grid has {grid.p} axes"
                )
            self.factors.append(tuple(row))
        self.tables = [
            [_axis_table(f, grid.axes[i], i, q) for i, f in enumerate(row)]
            for q, row in enumerate(self.factors)
        ]

    @property
    def n_terms(self):
        return len(self.factors)

    @property
    def p(self):
        return self.grid.p

    def coefficients(self, points):
        """``(n_points, n_terms)`` array of coefficient products at grid points."""
        idx = points.index if hasattr(points, "index") else np.atleast_2d(points)
        out = np.ones((idx.shape[0], self.n_terms))
        for q, tabs in enumerate(self.tables):
            for i, t in enumerate(tabs):
                if self.factors[q][i] is not None:
                    out[:, q] *= t[idx[:, i]]
        return out

    def coefficients_at(self, mu):
        """Coefficient products at a parameter value (off-grid where allowed)."""
        mu = np.atleast_1d(np.asarray(mu, dtype=float))
        if mu.size != self.p:
            raise ValueError(f"parameter has {mu.size} entries, operator has {self.p} axes")
        out = np.ones(self.n_terms)
        for i, x in enumerate(mu):
            lo, hi = self.grid.ranges[i]
            slack = 1e-12 * max(1.0, abs(lo), abs(hi))
            if x < lo - slack or x > hi + slack:
                raise ValueError(f"mu[{i}]={x} outside declared range [{lo}, {hi}]")
            j = self.grid.locate(i, x)
            for q in range(self.n_terms):
                f = self.factors[q][i]
                if f is None:
                    continue
                if j is not None:
                    out[q] *= self.tables[q][i][j]
                elif callable(f):
                    out[q] *= float(np.asarray(f(np.array([x])), dtype=float).ravel()[0])
                else:
                    raise ValueError(
                        f"term {q}: tabulated coefficient cannot be evaluated at off-grid "
                        f"mu[{i}]={x}"
                    )
        return out

    def _digest(self, h):
        for tabs in self.tables:
            for t in tabs:
                h.update(np.ascontiguousarray(t).tobytes())
        for a in self.grid.axes:
            h.update(np.ascontiguousarray(a).tobytes())


class AffineRHS(_Separable):
    """Right-hand side ``F(mu) = sum_s F_s prod_i phi_{s,i}(mu_i)`` with ``F_s`` of shape n x K."""

    def __init__(self, blocks, coefficients, grid):
        blocks = [np.asarray(b, dtype=float) for b in blocks]
        blocks = [b[:, None] if b.ndim == 1 else b for b in blocks]
        if not blocks:
            raise ValueError("right-hand side needs at least one term")
        shape = blocks[0].shape
        for b in blocks:
            if b.shape != shape:
                raise ValueError("all right-hand side blocks must share their shape")
        super().__init__(blocks, coefficients, grid)
        self.blocks = blocks

    @classmethod
    def constant(cls, block, grid):
        return cls([block], None, grid)

    @property
    def n(self):
        return self.blocks[0].shape[0]

    @property
    def k_cols(self):
        return self.blocks[0].shape[1]

    def evaluate(self, points):
        """``(n_points, n, K)`` values at grid points (small point sets only)."""
        c = self.coefficients(points)
        return np.einsum("ps,snk->pnk", c, np.stack(self.blocks))

    def at(self, mu):
        c = self.coefficients_at(mu)
        return sum(ci * b for ci, b in zip(c, self.blocks))

    def at_index(self, index):
        c = self.coefficients(np.atleast_2d(index))[0]
        return sum(ci * b for ci, b in zip(c, self.blocks))

    def digest(self):
        h = hashlib.sha256()
        for b in self.blocks:
            h.update(np.ascontiguousarray(b).tobytes())
        self._digest(h)
        return h.hexdigest()


class AffineOperator(_Separable):
    """Parametrized matrix ``A(mu) = sum_q A_q prod_i theta_{q,i}(mu_i)``.

    Parameters
    ----------
    matrices : sequence of sparse or dense n x n matrices
    coefficients : sequence (one per term) of length-``p`` sequences whose
        entries are ``None`` (constant 1), a table over the axis grid, or a
        vectorized callable (which also allows off-grid evaluation).
    grid : ParameterGrid
    rhs : AffineRHS, optional
    spd : bool
        Declares every ``A(mu)`` symmetric positive definite (needed by the
        Galerkin formulation).
    """

    def __init__(self, matrices, coefficients, grid, rhs=None, spd=False):
        mats = [as_sparse(m) for m in matrices]
        if not mats:
            raise ValueError("operator needs at least one term")
        n = mats[0].shape[0]
        for q, m in enumerate(mats):
            if m.shape != (n, n):
                raise ValueError(f"term {q} has shape {m.shape}, expected {(n, n)}")
        super().__init__(mats, coefficients, grid)
        self.matrices = mats
        if rhs is not None and rhs.n != n:
            raise ValueError(f"rhs has length {rhs.n}, operator dimension is {n}")
        if rhs is not None and rhs.grid is not grid and rhs.grid != grid:
            raise ValueError("rhs and operator must share the parameter grid")
        self.rhs = rhs
        self.spd = bool(spd)
        self._combination = None

    @property
    def n(self):
        return self.matrices[0].shape[0]

    def __repr__(self):
        return f"AffineOperator(n={self.n}, terms={self.n_terms}, p={self.p}, spd={self.spd})"

    def transpose(self):
        return AffineOperator(
            [m.T for m in self.matrices], self.factors, self.grid, spd=self.spd
        )

    def combine(self, weights):
        """``sum_q weights[q] A_q`` on the union sparsity pattern."""
        if self._combination is None:
            self._combination = MatrixCombination(self.matrices)
        return self._combination(weights)

    def assemble(self, mu):
        return self.combine(self.coefficients_at(mu))

    def assemble_index(self, index):
        return self.combine(self.coefficients(np.atleast_2d(index))[0])

    def apply(self, index, x):
        """``A(mu) x`` at the grid point with per-axis ``index``."""
        c = self.coefficients(np.atleast_2d(index))[0]
        return sum(ci * (m @ x) for ci, m in zip(c, self.matrices) if ci != 0.0)

    def digest(self):
        h = hashlib.sha256()
        for m in self.matrices:
            h.update(m.indptr.tobytes())
            h.update(m.indices.tobytes())
            h.update(m.data.tobytes())
        self._digest(h)
        if self.rhs is not None:
            h.update(self.rhs.digest().encode())
        return h.hexdigest()


class MatrixCombination:
    """Fast ``sum_q w_q M_q`` for a fixed list of sparse matrices."""

    def __init__(self, matrices):
        self.matrices = [as_sparse(m) for m in matrices]
        self._pattern = _union_pattern(self.matrices)

    def __len__(self):
        return len(self.matrices)

    def __call__(self, weights):
        weights = np.asarray(weights, dtype=float).ravel()
        if weights.size != len(self.matrices):
            raise ValueError(f"expected {len(self.matrices)} weights, got {weights.size}")
        rows, cols, data_maps, shape = self._pattern
        data = np.zeros(rows.size)
        for w, (pos, vals) in zip(weights, data_maps):
            if w != 0.0:
                data[pos] += w * vals
        return sp.csc_matrix((data, rows, cols), shape=shape)


def _union_pattern(mats):
    shape = mats[0].shape
    keys = [_keys(m) for m in mats]
    union = np.unique(np.concatenate(keys))
    cols = union // shape[0]
    rows = (union % shape[0]).astype(np.int32)
    indptr = np.searchsorted(cols, np.arange(shape[1] + 1)).astype(np.int32)
    maps = [(np.searchsorted(union, k), m.data.copy()) for k, m in zip(keys, mats)]
    return rows, indptr, maps, shape


def _keys(m):
    col = np.repeat(np.arange(m.shape[1], dtype=np.int64), np.diff(m.indptr))
    return col * m.shape[0] + m.indices


def affine_assemble(op, mu):
    """Assemble ``A(mu)`` for a parameter value."""
    return op.assemble(mu)


# ---------------------------------------------------------------------------


@dataclass
class GramPair:
    """SPD Gram matrix ``R_X`` with its Cholesky factorization."""

    r_x: sp.csc_matrix
    r_x_chol: Factorization = field(default=None)

    def __post_init__(self):
        self.r_x = as_sparse(self.r_x)
        if not is_symmetric(self.r_x):
            raise ValueError("Gram matrix must be symmetric")
        if self.r_x_chol is None:
            try:
                self.r_x_chol = factorize(self.r_x, "cholesky")
            except FactorizationError as exc:
                raise ValueError(f"Gram matrix is not SPD: {exc}")

    @property
    def n(self):
        return self.r_x.shape[0]


def _check_len(v, g):
    v = np.asarray(v, dtype=float)
    if v.shape[0] != g.n:
        raise ValueError(f"vector has length {v.shape[0]}, Gram matrix is {g.n} x {g.n}")
    return v


def _sqrt_form(val):
    val = np.asarray(val, dtype=float)
    if np.any(val < -1e-12 * np.maximum(1.0, np.abs(val))):
        raise ArithmeticError("negative quadratic form; Gram matrix is broken")
    return np.sqrt(np.maximum(val, 0.0))


def xnorm(v, g):
    """``sqrt(v^T R_X v)`` (columnwise for 2-D input)."""
    v = _check_len(v, g)
    return _sqrt_form(np.sum(v * (g.r_x @ v), axis=0))


def dual_norm(v, g):
    """``sqrt(v^T R_X^{-1} v)`` (columnwise for 2-D input)."""
    v = _check_len(v, g)
    return _sqrt_form(np.sum(v * solve_block(g.r_x_chol, v), axis=0))


# ---------------------------------------------------------------------------
# File formats


def read_mtx(path):
    return as_sparse(scipy.io.mmread(str(path)))


def write_mtx(path, m, symmetric=False):
    m = as_sparse(m)
    scipy.io.mmwrite(
        str(path), sp.coo_matrix(m), symmetry="symmetric" if symmetric else "general",
        precision=17,
    )


def read_vector(path):
    """Vector from a text file (one value per line) or raw little-endian ``.bin``."""
    path = str(path)
    if path.endswith(".bin"):
        return np.fromfile(path, dtype="<f8")
    return np.loadtxt(path, dtype=float, ndmin=1)


def write_vector(path, v):
    v = np.asarray(v, dtype=float).ravel()
    path = str(path)
    if path.endswith(".bin"):
        v.astype("<f8").tofile(path)
    else:
        with open(path, "w") as fh:
            for x in v:
                fh.write(f"{float(x)!r}\n")
