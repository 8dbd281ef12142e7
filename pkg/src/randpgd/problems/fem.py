"""Bilinear quadrilateral plane-stress elements on a structured rectangular mesh."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp

from ..linalg import as_sparse

__all__ = [
    "MeshSpec",
    "plane_stress_matrix",
    "gauss_point_matrices",
    "assemble_elements",
    "element_stresses",
]

_EDGES = ("left", "right", "bottom", "top")
_GP = np.array([-1.0, 1.0]) / np.sqrt(3.0)
# node order in the reference element: (-1,-1), (1,-1), (1,1), (-1,1)
_XI = np.array([-1.0, 1.0, 1.0, -1.0])
_ETA = np.array([-1.0, -1.0, 1.0, 1.0])


@dataclass(frozen=True)
class MeshSpec:
    """Structured ``nx x ny`` mesh of ``[0, lx] x [0, ly]``.

    ``clamped`` names the edge with homogeneous Dirichlet conditions; the load
    is a uniform traction ``magnitude * direction`` per unit length on
    ``load_edge``.
    """

    nx: int = 49
    ny: int = 14
    lx: float = 7.0
    ly: float = 2.0
    clamped: str = "left"
    load_edge: str = "right"
    load_direction: tuple = (0.0, -1.0)
    load_magnitude: float = 1.0

    def __post_init__(self):
        if self.nx < 2 or self.ny < 2:
            raise ValueError("mesh needs nx, ny >= 2")
        if not (self.lx > 0 and self.ly > 0):
            raise ValueError("degenerate mesh: lengths must be positive")
        if self.clamped not in _EDGES or self.load_edge not in _EDGES:
            raise ValueError(f"edges must be one of {_EDGES}")

    @property
    def hx(self):
        return self.lx / self.nx

    @property
    def hy(self):
        return self.ly / self.ny

    @property
    def n_nodes(self):
        return (self.nx + 1) * (self.ny + 1)

    @property
    def n_elements(self):
        return self.nx * self.ny

    def node_id(self, ix, iy):
        return np.asarray(ix) * (self.ny + 1) + np.asarray(iy)

    @property
    def coords(self):
        ix, iy = np.meshgrid(np.arange(self.nx + 1), np.arange(self.ny + 1), indexing="ij")
        return np.column_stack([ix.ravel() * self.hx, iy.ravel() * self.hy])

    @property
    def connectivity(self):
        ex, ey = np.meshgrid(np.arange(self.nx), np.arange(self.ny), indexing="ij")
        ex, ey = ex.ravel(), ey.ravel()
        return np.column_stack(
            [
                self.node_id(ex, ey),
                self.node_id(ex + 1, ey),
                self.node_id(ex + 1, ey + 1),
                self.node_id(ex, ey + 1),
            ]
        )

    @property
    def element_dofs(self):
        c = self.connectivity
        return np.stack([2 * c, 2 * c + 1], axis=2).reshape(-1, 8)

    def edge_nodes(self, edge):
        if edge == "left":
            return self.node_id(0, np.arange(self.ny + 1))
        if edge == "right":
            return self.node_id(self.nx, np.arange(self.ny + 1))
        if edge == "bottom":
            return self.node_id(np.arange(self.nx + 1), 0)
        return self.node_id(np.arange(self.nx + 1), self.ny)

    @property
    def fixed_dofs(self):
        nodes = self.edge_nodes(self.clamped)
        return np.sort(np.concatenate([2 * nodes, 2 * nodes + 1]))

    @property
    def free_dofs(self):
        mask = np.ones(2 * self.n_nodes, dtype=bool)
        mask[self.fixed_dofs] = False
        return np.flatnonzero(mask)

    @property
    def n_free(self):
        return self.free_dofs.size

    def gauss_points(self):
        """Physical coordinates of the 2x2 Gauss points, shape ``(n_el, 4, 2)``."""
        c = self.coords[self.connectivity]  # (n_el, 4, 2)
        x0 = c[:, 0, :]
        pts = []
        for eta in _GP:
            for xi in _GP:
                pts.append(x0 + np.array([(xi + 1) * self.hx / 2, (eta + 1) * self.hy / 2]))
        return np.stack(pts, axis=1)

    def traction_load(self):
        """Consistent nodal load (full DOF vector) of the edge traction."""
        nodes = self.edge_nodes(self.load_edge)
        h = self.hy if self.load_edge in ("left", "right") else self.hx
        w = np.full(nodes.size, h)
        w[0] = w[-1] = h / 2
        f = np.zeros(2 * self.n_nodes)
        d = np.asarray(self.load_direction, dtype=float)
        f[2 * nodes] += self.load_magnitude * d[0] * w
        f[2 * nodes + 1] += self.load_magnitude * d[1] * w
        return f


def plane_stress_matrix(E, nu):
    """Voigt elasticity matrix with engineering shear strain."""
    return E / (1.0 - nu**2) * np.array(
        [[1.0, nu, 0.0], [nu, 1.0, 0.0], [0.0, 0.0, (1.0 - nu) / 2.0]]
    )


def _shape_derivatives(xi, eta, hx, hy):
    dndxi = _XI * (1 + eta * _ETA) / 4.0
    dndeta = _ETA * (1 + xi * _XI) / 4.0
    return dndxi * 2.0 / hx, dndeta * 2.0 / hy


def _shape_values(xi, eta):
    return (1 + xi * _XI) * (1 + eta * _ETA) / 4.0


def _strain_matrix(dx, dy):
    b = np.zeros((3, 8))
    b[0, 0::2] = dx
    b[1, 1::2] = dy
    b[2, 0::2] = dy
    b[2, 1::2] = dx
    return b


def gauss_point_matrices(hx, hy, nu):
    """Per-Gauss-point element contributions for a unit-Young's-modulus element.

    Returns ``(stiffness, mass, grad)`` each of shape ``(4, 8, 8)``, Gauss points
    ordered as in :meth:`MeshSpec.gauss_points`; the element matrix is the sum
    over the first axis (times a pointwise weight where applicable).
    """
    D = plane_stress_matrix(1.0, nu)
    jac = hx * hy / 4.0
    stiff, mass, grad = [], [], []
    for eta in _GP:
        for xi in _GP:
            dx, dy = _shape_derivatives(xi, eta, hx, hy)
            b = _strain_matrix(dx, dy)
            stiff.append(b.T @ D @ b * jac)
            n = _shape_values(xi, eta)
            nmat = np.zeros((2, 8))
            nmat[0, 0::2] = n
            nmat[1, 1::2] = n
            mass.append(nmat.T @ nmat * jac)
            g = np.zeros((4, 8))
            g[0, 0::2] = dx
            g[1, 0::2] = dy
            g[2, 1::2] = dx
            g[3, 1::2] = dy
            grad.append(g.T @ g * jac)
    return np.array(stiff), np.array(mass), np.array(grad)


def assemble_elements(mesh, element_matrices, free_only=True):
    """Sparse global matrix from ``(n_el, 8, 8)`` element matrices."""
    dofs = mesh.element_dofs
    rows = np.repeat(dofs, 8, axis=1).ravel()
    cols = np.tile(dofs, (1, 8)).ravel()
    ndof = 2 * mesh.n_nodes
    m = sp.coo_matrix(
        (np.asarray(element_matrices).ravel(), (rows, cols)), shape=(ndof, ndof)
    )
    m = as_sparse(m)
    if free_only:
        free = mesh.free_dofs
        m = as_sparse(m[free][:, free])
    return m


def element_stresses(mesh, u_full, E, nu):
    """Stresses ``(sxx, syy, sxy)`` at the Gauss points, shape ``(n_el, 4, 3)``."""
    D = plane_stress_matrix(E, nu)
    ue = np.asarray(u_full)[mesh.element_dofs]
    out = np.empty((mesh.n_elements, 4, 3))
    k = 0
    for eta in _GP:
        for xi in _GP:
            b = _strain_matrix(*_shape_derivatives(xi, eta, mesh.hx, mesh.hy))
            out[:, k, :] = ue @ b.T @ D.T
            k += 1
    return out
