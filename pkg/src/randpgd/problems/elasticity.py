"""Plane-stress cantilever benchmarks: harmonic response and lognormal modulus."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from ..grid import ParameterGrid, quantile_axis, uniform_axis
from ..linalg import AffineOperator, AffineRHS, GramPair
from .fem import MeshSpec, assemble_elements, gauss_point_matrices
from .kl import kl_modes

__all__ = [
    "LogField",
    "ElasticitySpec",
    "Benchmark",
    "harmonic_grid",
    "highdim_grid",
    "build_harmonic_bar",
    "build_highdim_elasticity",
    "h1_gram",
    "l2_gram",
    "anchor_lattice",
    "anchor_weights",
    "harmonic_problem",
    "highdim_problem",
]


@dataclass(frozen=True)
class LogField:
    """Lognormal Young's modulus ``exp(sum_i mu_i sqrt(sigma_i) phi_i)``.

    The affine form interpolates the field from ``anchors[0] x anchors[1]``
    lattice nodes with bilinear hat weights.
    """

    sigma0: float = 0.4
    l0: float = 4.0
    p: int = 20
    modes: str = "kernel"
    anchors: tuple = (7, 4)


@dataclass(frozen=True)
class ElasticitySpec:
    nu: float = 0.3
    young: float = 1.0
    log_field: LogField = None
    wave_axis: tuple = (0.5, 1.2)

    def __post_init__(self):
        if not 0.0 < self.nu < 0.5:
            raise ValueError(f"Poisson ratio {self.nu} outside (0, 0.5)")
        if self.young <= 0:
            raise ValueError("Young's modulus must be positive")


@dataclass
class Benchmark:
    """A generated problem with the pieces needed downstream."""

    operator: AffineOperator
    gram: GramPair
    mesh: MeshSpec
    spec: ElasticitySpec
    mass: object = None
    info: dict = field(default_factory=dict)

    @property
    def grid(self):
        return self.operator.grid

    @property
    def rhs(self):
        return self.operator.rhs


def _gp_matrices(mesh, nu):
    return gauss_point_matrices(mesh.hx, mesh.hy, nu)


def h1_gram(mesh):
    """``R_X`` of ``int grad u : grad v + u . v`` on the free DOFs."""
    _, mass, grad = _gp_matrices(mesh, 0.3)
    el = np.broadcast_to((mass + grad).sum(axis=0), (mesh.n_elements, 8, 8))
    return assemble_elements(mesh, el)


def l2_gram(mesh):
    _, mass, _ = _gp_matrices(mesh, 0.3)
    return assemble_elements(mesh, np.broadcast_to(mass.sum(axis=0), (mesh.n_elements, 8, 8)))


def _free_load(mesh):
    return mesh.traction_load()[mesh.free_dofs]


def harmonic_grid(count=500, low=0.5, high=1.2):
    return ParameterGrid([uniform_axis(low, high, count)])


def build_harmonic_bar(mesh=None, spec=None, grid=None):
    """``A(mu) = A_1 - mu A_2`` (stiffness minus ``k^2`` times mass).

    Returns
    -------
    (AffineOperator, GramPair)
        The operator carries the traction load as its right-hand side.
    """
    mesh = mesh or MeshSpec()
    spec = spec or ElasticitySpec()
    if spec.log_field is not None:
        raise ValueError("the harmonic bar needs a constant Young's modulus")
    if grid is None:
        grid = harmonic_grid(500, *spec.wave_axis)
    if grid.p != 1:
        raise ValueError("the harmonic bar has exactly one parameter axis")
    stiff, mass, _ = _gp_matrices(mesh, spec.nu)
    n_el = mesh.n_elements
    a1 = assemble_elements(mesh, np.broadcast_to(spec.young * stiff.sum(axis=0), (n_el, 8, 8)))
    a2 = assemble_elements(mesh, np.broadcast_to(mass.sum(axis=0), (n_el, 8, 8)))
    rhs = AffineRHS.constant(_free_load(mesh), grid)
    op = AffineOperator([a1, a2], [[None], [np.negative]], grid, rhs=rhs, spd=False)
    return op, GramPair(h1_gram(mesh))


def anchor_lattice(mesh, counts=(7, 4)):
    """Node indices of the coarse anchor lattice along x and y."""
    cx, cy = counts
    if cx < 2 or cy < 2:
        raise ValueError("anchor lattice needs at least 2 x 2 nodes")
    ix = np.rint(np.linspace(0, mesh.nx, cx)).astype(int)
    iy = np.rint(np.linspace(0, mesh.ny, cy)).astype(int)
    if np.unique(ix).size != cx or np.unique(iy).size != cy:
        raise ValueError("anchor lattice finer than the mesh")
    return ix, iy


def _hat(x, knots):
    """Piecewise-linear hat functions on ``knots`` evaluated at ``x``: ``(len(x), len(knots))``."""
    eye = np.eye(knots.size)
    return np.column_stack([np.interp(x, knots, eye[j]) for j in range(knots.size)])


def anchor_weights(mesh, points, counts=(7, 4)):
    """Bilinear partition-of-unity weights of the anchors at ``points``."""
    ix, iy = anchor_lattice(mesh, counts)
    hx = _hat(points[:, 0], ix * mesh.hx)
    hy = _hat(points[:, 1], iy * mesh.hy)
    w = (hx[:, :, None] * hy[:, None, :]).reshape(points.shape[0], -1)
    if np.any(w < -1e-14):
        raise ValueError("negative partition weight")
    return w


def highdim_grid(p=20, count=50):
    return ParameterGrid([quantile_axis(count) for _ in range(p)])


def build_highdim_elasticity(mesh=None, spec=None, axes=None, modes=None):
    """Anchor-interpolated lognormal modulus: ``A(mu) = sum_j zeta^j(mu) A_j``.

    ``A_j`` is the stiffness weighted by the hat function of anchor ``j``;
    ``zeta^j(mu) = prod_i exp(mu_i sqrt(sigma_i) phi_i(x^j))`` is kept as
    closed-form per-axis callables.  Returns ``(AffineOperator, GramPair)``.
    """
    mesh = mesh or MeshSpec()
    spec = spec or ElasticitySpec(log_field=LogField())
    lf = spec.log_field
    if lf is None:
        raise ValueError("the high-dimensional problem needs a log_field")
    grid = axes if isinstance(axes, ParameterGrid) else (
        ParameterGrid(axes) if axes is not None else highdim_grid(lf.p)
    )
    if grid.p != lf.p:
        raise ValueError(f"log field has {lf.p} modes but grid has {grid.p} axes")
    if modes is None:
        modes = kl_modes(lf.sigma0, lf.l0, mesh, lf.p, method=lf.modes)
    ix, iy = anchor_lattice(mesh, lf.anchors)
    anchor_nodes = mesh.node_id(ix[:, None], iy[None, :]).ravel()
    phi_anchor = modes.nodal[anchor_nodes]  # (Q, p)

    stiff, _, _ = _gp_matrices(mesh, spec.nu)
    gp = mesh.gauss_points()  # (n_el, 4, 2)
    weights = anchor_weights(mesh, gp.reshape(-1, 2), lf.anchors).reshape(
        mesh.n_elements, 4, -1
    )
    matrices = []
    for j in range(weights.shape[2]):
        el = np.einsum("eg,gab->eab", weights[:, :, j], stiff) * spec.young
        matrices.append(assemble_elements(mesh, el))
    scale = np.sqrt(modes.values)
    coefficients = [
        [_exp_factor(scale[i] * phi_anchor[j, i]) for i in range(lf.p)]
        for j in range(len(matrices))
    ]
    rhs = AffineRHS.constant(_free_load(mesh), grid)
    op = AffineOperator(matrices, coefficients, grid, rhs=rhs, spd=True)
    return op, GramPair(h1_gram(mesh))


class _exp_factor:
    """``t -> exp(c t)``; a class so that the rate stays inspectable."""

    def __init__(self, rate):
        self.rate = float(rate)

    def __call__(self, t):
        return np.exp(self.rate * np.asarray(t, dtype=float))

    def __repr__(self):
        return f"exp({self.rate!r} * t)"


def harmonic_problem(mesh=None, spec=None, count=500):
    mesh = mesh or MeshSpec()
    spec = spec or ElasticitySpec()
    op, gram = build_harmonic_bar(mesh, spec, harmonic_grid(count, *spec.wave_axis))
    return Benchmark(op, gram, mesh, spec, mass=l2_gram(mesh), info={"name": "harmonic"})


def highdim_problem(mesh=None, spec=None, p=20, count=50):
    mesh = mesh or MeshSpec()
    spec = spec or ElasticitySpec(log_field=LogField(p=p))
    op, gram = build_highdim_elasticity(mesh, spec, highdim_grid(spec.log_field.p, count))
    return Benchmark(op, gram, mesh, spec, mass=l2_gram(mesh), info={"name": "highdim"})
