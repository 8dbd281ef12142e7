"""Residuals of canonical approximations, pointwise and in reduced form."""

from __future__ import annotations

import numpy as np

from ..linalg import solve_block
from .greedy import _as_rhs

__all__ = ["residual", "residual_index", "ResidualExpansion"]


def _grid_index(grid, mu):
    mu = np.atleast_1d(np.asarray(mu, dtype=float))
    if mu.size != grid.p:
        raise ValueError(f"parameter has {mu.size} entries, grid has {grid.p} axes")
    index = []
    for i, x in enumerate(mu):
        j = grid.locate(i, x)
        if j is None:
            raise ValueError(f"mu[{i}]={x} is not a grid point")
        index.append(j)
    return index


def residual_index(op, rhs, t, index):
    """``F(mu) - A(mu) U(mu)`` at the grid point with per-axis ``index``."""
    rhs = _as_rhs(rhs, op)
    if t.n != op.n:
        raise ValueError(f"tensor has {t.n} rows, operator dimension is {op.n}")
    if t.k_cols != rhs.k_cols:
        raise ValueError(f"tensor has {t.k_cols} columns, rhs has {rhs.k_cols}")
    u = t.evaluate_index(index)
    r = rhs.at_index(index) - op.apply(index, u)
    return r[:, 0] if r.shape[1] == 1 else r


def residual(op, rhs, t, mu):
    """``r(mu) = F(mu) - A(mu) U(mu)`` at a grid parameter value."""
    return residual_index(op, rhs, t, _grid_index(op.grid, mu))


class ResidualExpansion:
    """``r(mu) = sum_a c_a(mu) R_a`` with atoms ``F_s`` and ``A_q U^m``.

    The atom coefficients are ``phi_s(mu)`` and ``-theta_q(mu) w^m(mu)``, which
    turns every quadratic or linear functional of the residual into a small
    contraction that can be evaluated on many grid points.
    """

    def __init__(self, op, rhs, tensor):
        rhs = _as_rhs(rhs, op)
        if tensor.n != op.n or tensor.k_cols != rhs.k_cols:
            raise ValueError("tensor is incompatible with the problem")
        self.op, self.rhs, self.tensor = op, rhs, tensor
        au = [m @ tensor.spatial[j] for j in range(tensor.rank) for m in op.matrices]
        self.atoms = np.stack(list(rhs.blocks) + au)  # (n_atoms, n, K)
        self.n_rhs = len(rhs.blocks)

    @property
    def n_atoms(self):
        return self.atoms.shape[0]

    def coefficients(self, points):
        phi = self.rhs.coefficients(points)
        if self.tensor.rank == 0:
            return phi
        theta = self.op.coefficients(points)
        omega = self.tensor.weights(points)
        prod = -(omega[:, :, None] * theta[:, None, :]).reshape(len(phi), -1)
        return np.hstack([phi, prod])

    def rhs_coefficients(self, points):
        c = np.zeros((len(points) if hasattr(points, "index") else len(points), self.n_atoms))
        c[:, : self.n_rhs] = self.rhs.coefficients(points)
        return c

    def evaluate(self, points):
        """``(n_points, n, K)`` residuals."""
        return np.einsum("pa,ank->pnk", self.coefficients(points), self.atoms)

    def gram(self, gram=None):
        """Atom Gram matrix in the Euclidean (``None``) or ``R_X^{-1}`` inner product."""
        a = self.atoms
        if gram is None:
            w = a
        else:
            flat = a.transpose(1, 0, 2).reshape(a.shape[1], -1)
            w = solve_block(gram.r_x_chol, flat).reshape(a.shape[1], a.shape[0], -1)
            w = w.transpose(1, 0, 2)
        return np.einsum("ank,bnk->ab", a, w)

    def root(self, gram=None):
        """Triangular ``R`` with ``R^T R`` the atom Gram matrix, from a QR of the atoms.

        ``||R c||`` keeps full relative accuracy when the residual is small,
        unlike ``c^T G c``, which cancels to about the square root of the
        machine precision.
        """
        a = self.atoms
        flat = a.transpose(1, 2, 0).reshape(-1, a.shape[0])  # (n K, A)
        if gram is not None:
            w = gram.r_x_chol.whiten(a.transpose(1, 0, 2).reshape(a.shape[1], -1))
            flat = w.reshape(a.shape[1], a.shape[0], -1).transpose(0, 2, 1).reshape(-1, a.shape[0])
        return np.linalg.qr(flat, mode="r")

    def sq_norms(self, points, gram=None, g=None, root=None):
        """``||r(mu)||^2`` (Frobenius over columns) at every point.

        Uses the atom Gram matrix ``g`` when given, otherwise the stable
        triangular factor ``root``.
        """
        c = self.coefficients(points)
        if g is not None:
            return np.maximum(np.einsum("pa,ab,pb->p", c, g, c), 0.0)
        r = self.root(gram) if root is None else root
        rc = c @ r.T
        return np.sum(rc * rc, axis=1)

    def project(self, vectors):
        """``vectors^T R_a`` for ``vectors`` of shape ``(n, J)``: array ``(n_atoms, J, K)``."""
        return np.einsum("nj,ank->ajk", vectors, self.atoms)
