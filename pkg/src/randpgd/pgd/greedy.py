"""Pure greedy rank-one PGD with alternating least squares (ALS).

A rank-one correction ``X * lam(mu)`` with ``lam(mu) = prod_i w_i(mu_i)`` is
sought for the current approximation ``U(mu)``.  For fixed ``X`` the objective
is the separable quadratic

    J(lam) = J(U) + sum_mu [lam(mu)^2 a(mu) - 2 lam(mu) b(mu)]

whose coefficients ``a`` and ``b`` are cheap to obtain from reduced
quantities (traces of ``X`` against affine terms), so that each factor update
is a weighted bin count.  For fixed factors the spatial block solves one sparse
system whose matrix is an affine combination of precomputed terms; all ``K``
columns of a matrix-valued right-hand side share its factorization.

Objectives
----------
min_residual
    ``mean_mu ||F(mu) - A(mu) U(mu)||_F^2``.
galerkin
    The energy ``mean_mu tr(U^T A U) - 2 tr(U^T F)``.  It differs from the
    ``A(mu)^{-1}``-weighted squared residual by the constant
    ``mean_mu ||F(mu)||^2_{A(mu)^{-1}}`` so the zero tensor has objective 0.

Means run over an explicit point set (the full grid when it is small) or,
for large grids, exactly over the full product grid by factorizing every
mean into per-axis means.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace

import numpy as np

from ..linalg import (
    AffineRHS,
    FactorizationError,
    MatrixCombination,
    factorize,
    solve_block,
)
from .tensor import CanonicalTensor

__all__ = [
    "FORMULATIONS",
    "GreedyConfig",
    "CorrectionRejected",
    "CorrectionState",
    "GreedyBuilder",
    "summation_points",
    "rank_one_correction",
    "als_sweep",
    "greedy_solve",
    "dual_greedy_solve",
]

FORMULATIONS = ("min_residual", "galerkin")
SUMS = ("auto", "points", "grid")
FULL_GRID_LIMIT = 1_000_000
DEFAULT_SUM_POINTS = 10_000


class CorrectionRejected(ArithmeticError):
    """Every ALS restart hit a singular subproblem."""


class _Degenerate(Exception):
    pass


@dataclass
class GreedyConfig:
    """Settings of the greedy/ALS construction.

    Parameters
    ----------
    formulation : {"min_residual", "galerkin"}
    max_rank : int
        Number of greedy corrections.
    als_sweeps : int
        Maximum ALS sweeps per correction.
    als_stagnation_tol : float
        A sweep whose objective decrease is below this fraction of the gain
        accumulated so far ends the ALS loop.
    seed : int
        Seeds the random factor initialization.
    max_restarts : int
        Fresh initializations tried after a singular ALS subproblem.
    n_points : int, optional
        Size of a seeded grid subsample for the objective means.
    point_seed : int
    sums : {"auto", "points", "grid"}
        ``"points"`` averages over the full grid, or over a subsample of
        ``n_points`` (default ``10**4``) when the grid has more than ``10**6``
        points; ``"grid"`` uses exact factorized means over the full grid;
        ``"auto"`` picks ``"grid"`` for grids above ``10**6`` points unless
        ``n_points`` is set.
    """

    formulation: str = "min_residual"
    max_rank: int = 10
    als_sweeps: int = 4
    als_stagnation_tol: float = 1e-3
    seed: int = 0
    max_restarts: int = 3
    n_points: int = None
    point_seed: int = 0
    sums: str = "auto"

    def __post_init__(self):
        if self.sums not in SUMS:
            raise ValueError(f"sums must be one of {SUMS}")
        if self.formulation not in FORMULATIONS:
            raise ValueError(f"formulation must be one of {FORMULATIONS}")
        if self.max_rank < 0:
            raise ValueError("max_rank must be nonnegative")
        if self.als_sweeps < 1:
            raise ValueError("als_sweeps must be at least 1")
        if self.als_stagnation_tol < 0:
            raise ValueError("als_stagnation_tol must be nonnegative")
        if self.max_restarts < 0:
            raise ValueError("max_restarts must be nonnegative")

    def check(self, op):
        if self.formulation == "galerkin" and not op.spd:
            raise ValueError("the Galerkin formulation requires an operator flagged SPD")

    def with_(self, **kw):
        return replace(self, **kw)

    def uses_grid(self, grid):
        """Whether objective means run over the full grid in factorized form."""
        if self.sums == "auto":
            return self.n_points is None and grid.cardinality > FULL_GRID_LIMIT
        return self.sums == "grid"


def summation_points(grid, n_points=None, seed=0):
    """Points over which grid sums run: the full grid or a seeded subsample."""
    if n_points is None:
        if grid.cardinality <= FULL_GRID_LIMIT:
            return grid.full()
        n_points = DEFAULT_SUM_POINTS
    if grid.cardinality <= n_points:
        return grid.full()
    return grid.sample(n_points, seed=seed)


def _as_rhs(rhs, op):
    if rhs is None:
        if op.rhs is None:
            raise ValueError("no right-hand side given and the operator carries none")
        return op.rhs
    if isinstance(rhs, AffineRHS):
        if rhs.n != op.n:
            raise ValueError(f"rhs has length {rhs.n}, operator dimension is {op.n}")
        return rhs
    block = np.asarray(rhs, dtype=float)
    if block.shape[0] != op.n:
        raise ValueError(f"rhs block has {block.shape[0]} rows, operator dimension is {op.n}")
    return AffineRHS.constant(block, op.grid)


class _PointContext:
    """Objective sums over an explicit point set (means over the points)."""

    def __init__(self, op, rhs, points, formulation):
        self.op = op
        self.rhs = rhs
        self.points = points
        self.idx = points.index
        self.shape = op.grid.shape
        self.minres = formulation == "min_residual"
        self.theta = op.coefficients(points)
        self.phi = rhs.coefficients(points)
        self.F = np.stack(rhs.blocks)  # (S, n, K)
        self.mats = op.matrices
        self.Q = len(self.mats)
        n, k = rhs.n, rhs.k_cols
        self.AU = np.zeros((0, self.Q, n, k))
        self.omega = np.zeros((len(points), 0))
        if self.minres:
            self.normal = MatrixCombination([a.T @ b for a in self.mats for b in self.mats])
            h = np.einsum("snk,tnk->st", self.F, self.F)
            self.objective = float(np.einsum("ps,st,pt->", self.phi, h, self.phi)) / len(points)
        else:
            self.objective = 0.0
        self.zero_objective = self.objective

    @property
    def rank(self):
        return self.AU.shape[0]

    def lam(self, factors, skip=None):
        out = np.ones(len(self.points))
        for i, w in enumerate(factors):
            if i != skip:
                out = out * w[self.idx[:, i]]
        return out

    def add_term(self, block, factors):
        au = np.stack([a @ block for a in self.mats])
        self.AU = np.concatenate([self.AU, au[None]], axis=0)
        self.omega = np.column_stack([self.omega, self.lam(factors)])

    def spatial_solve(self, factors):
        lam = self.lam(factors)
        theta, l2 = self.theta, lam**2
        if self.minres:
            e = theta.T @ (theta * l2[:, None])
            matrix = self.normal(e.ravel())
            tl = theta * lam[:, None]
            inner = np.einsum("qs,snk->qnk", tl.T @ self.phi, self.F)
            if self.rank:
                h = np.einsum("pq,pr,pm->qrm", tl, theta, self.omega)
                inner -= np.einsum("qrm,mrnk->qnk", h, self.AU)
            rhs = sum(a.T @ inner[q] for q, a in enumerate(self.mats))
        else:
            matrix = self.op.combine(theta.T @ l2)
            rhs = np.einsum("s,snk->nk", self.phi.T @ lam, self.F)
            if self.rank:
                h = (theta * lam[:, None]).T @ self.omega
                rhs -= np.einsum("qm,mqnk->nk", h, self.AU)
        return _solve_spatial(matrix, rhs)

    def reduced(self, x):
        """Per-point ``(a, b)`` of the quadratic in ``lam`` for block ``x``."""
        theta, phi = self.theta, self.phi
        if self.minres:
            v = np.stack([a @ x for a in self.mats])
            g = np.einsum("qnk,rnk->qr", v, v)
            c = np.einsum("qnk,snk->qs", v, self.F)
            a = np.einsum("pq,qr,pr->p", theta, g, theta)
            b = np.einsum("pq,qs,ps->p", theta, c, phi)
            if self.rank:
                d = np.einsum("qnk,mrnk->qrm", v, self.AU)
                t = (theta @ d.reshape(self.Q, -1)).reshape(len(theta), self.Q, -1)
                b -= np.einsum("pr,pm,prm->p", theta, self.omega, t)
        else:
            alpha = np.array([np.sum(x * (m @ x)) for m in self.mats])
            beta = np.einsum("nk,snk->s", x, self.F)
            a = theta @ alpha
            b = phi @ beta
            if self.rank:
                gamma = np.einsum("nk,mqnk->qm", x, self.AU)
                b -= np.sum((theta @ gamma) * self.omega, axis=1)
        return a, b

    def value(self, factors, red):
        lam = self.lam(factors)
        a, b = red
        return self.objective + float(np.mean(lam * lam * a - 2.0 * lam * b))

    def update_axis(self, factors, i, red):
        a, b = red
        lam_i = self.lam(factors, skip=i)
        col = self.idx[:, i]
        size = self.shape[i]
        num = np.bincount(col, lam_i * b, minlength=size)
        den = np.bincount(col, lam_i * lam_i * a, minlength=size)
        w = np.zeros(size)
        ok = den > 0
        w[ok] = num[ok] / den[ok]
        return w


def rx_tables(op, rhs, tensor, i):
    """Axis-``i`` tables of the residual coefficients ``[phi_s, theta_q w_m]``.

    Rows follow the atom order of :class:`ResidualExpansion` without the
    sign of the operator atoms.
    """
    phi = np.stack([t[i] for t in rhs.tables])
    theta = np.stack([t[i] for t in op.tables])
    omega = tensor.factors[i]
    return np.vstack([phi, (omega[:, None] * theta[None]).reshape(-1, phi.shape[1])])


def _letters(count):
    return "abcdefgh"[:count]


class _GridContext:
    """Exact objective means over the full product grid.

    Every quantity is a sum of terms ``c_t prod_i g_{t,i}(mu_i)``, so grid
    means factor into per-axis means and no point set is materialized.  A
    term is a product of "families" (the coefficient tables ``theta``,
    ``phi`` and the factors ``w`` of accepted terms), one index per family.
    """

    def __init__(self, op, rhs, formulation):
        self.op = op
        self.rhs = rhs
        self.points = None
        self.shape = op.grid.shape
        self.minres = formulation == "min_residual"
        self.F = np.stack(rhs.blocks)
        self.mats = op.matrices
        self.Q = len(self.mats)
        n, k = rhs.n, rhs.k_cols
        self.AU = np.zeros((0, self.Q, n, k))
        self.theta = [np.stack([op.tables[q][i] for q in range(self.Q)]) for i in range(op.p)]
        self.phi = [np.stack([t[i] for t in rhs.tables]) for i in range(op.p)]
        self.omega = [np.zeros((0, s)) for s in self.shape]
        if self.minres:
            self.normal = MatrixCombination([a.T @ b for a in self.mats for b in self.mats])
            h = np.einsum("snk,tnk->st", self.F, self.F)
            self.objective = float(np.sum(h * self.mean(("phi", "phi"), None, 0)))
        else:
            self.objective = 0.0
        self.zero_objective = self.objective

    @property
    def rank(self):
        return self.AU.shape[0]

    def _tables(self, names, i):
        return [getattr(self, name)[i] for name in names]

    def _moments(self, names, factors, power, i):
        """``mean_j prod_f fam_f[:, j] * w_i(j)^power`` over axis ``i``."""
        tabs = self._tables(names, i)
        idx = _letters(len(tabs))
        weight = np.ones(self.shape[i]) if factors is None else factors[i] ** power
        sub = ",".join(f"{c}z" for c in idx) + ",z->" + idx
        return np.einsum(sub, *tabs, weight) / self.shape[i]

    def mean(self, names, factors, power, skip=None):
        """Grid mean of every term (tensor over the family indices)."""
        out = None
        for i in range(len(self.shape)):
            if i == skip:
                continue
            m = self._moments(names, factors, power, i)
            out = m if out is None else out * m
        return out

    def partial(self, names, coef, factors, power, i):
        """Per-value contraction along axis ``i``: ``sum_t coef_t g_{t,i}(j) prod_{i'!=i} m_{t,i'}``."""
        others = self.mean(names, factors, power, skip=i)
        c = coef if others is None else coef * others
        tabs = self._tables(names, i)
        idx = _letters(len(tabs))
        sub = idx + "," + ",".join(f"{ch}z" for ch in idx) + "->z"
        return np.einsum(sub, c, *tabs)

    def add_term(self, block, factors):
        au = np.stack([a @ block for a in self.mats])
        self.AU = np.concatenate([self.AU, au[None]], axis=0)
        self.omega = [np.vstack([o, w[None]]) for o, w in zip(self.omega, factors)]

    def spatial_solve(self, factors):
        if self.minres:
            e = self.mean(("theta", "theta"), factors, 2)
            matrix = self.normal(e.ravel())
            inner = np.einsum("qs,snk->qnk", self.mean(("theta", "phi"), factors, 1), self.F)
            if self.rank:
                h = self.mean(("theta", "theta", "omega"), factors, 1)
                inner -= np.einsum("qrm,mrnk->qnk", h, self.AU)
            rhs = sum(a.T @ inner[q] for q, a in enumerate(self.mats))
        else:
            matrix = self.op.combine(self.mean(("theta",), factors, 2))
            rhs = np.einsum("s,snk->nk", self.mean(("phi",), factors, 1), self.F)
            if self.rank:
                h = self.mean(("theta", "omega"), factors, 1)
                rhs -= np.einsum("qm,mqnk->nk", h, self.AU)
        return _solve_spatial(matrix, rhs)

    def reduced(self, x):
        """Term coefficients of ``a(mu)`` and ``b(mu)`` as ``[(families, coef), ...]``."""
        if self.minres:
            v = np.stack([a @ x for a in self.mats])
            a = [(("theta", "theta"), np.einsum("qnk,rnk->qr", v, v))]
            b = [(("theta", "phi"), np.einsum("qnk,snk->qs", v, self.F))]
            if self.rank:
                b.append((("theta", "theta", "omega"), -np.einsum("qnk,mrnk->qrm", v, self.AU)))
        else:
            a = [(("theta",), np.array([np.sum(x * (m @ x)) for m in self.mats]))]
            b = [(("phi",), np.einsum("nk,snk->s", x, self.F))]
            if self.rank:
                b.append((("theta", "omega"), -np.einsum("nk,mqnk->qm", x, self.AU)))
        return a, b

    def value(self, factors, red):
        a, b = red
        qa = sum(float(np.sum(c * self.mean(names, factors, 2))) for names, c in a)
        qb = sum(float(np.sum(c * self.mean(names, factors, 1))) for names, c in b)
        return self.objective + qa - 2.0 * qb

    def update_axis(self, factors, i, red):
        a, b = red
        num = sum(self.partial(names, c, factors, 1, i) for names, c in b)
        den = sum(self.partial(names, c, factors, 2, i) for names, c in a)
        w = np.zeros(self.shape[i])
        ok = den > 0
        w[ok] = num[ok] / den[ok]
        return w


def _solve_spatial(matrix, rhs):
    try:
        fac = factorize(matrix, "cholesky")
    except FactorizationError:
        try:
            fac = factorize(matrix, "lu")
        except FactorizationError as exc:
            raise _Degenerate(f"singular spatial subproblem: {exc}")
    x = solve_block(fac, rhs)
    if not np.all(np.isfinite(x)) or not np.any(x):
        raise _Degenerate("spatial block vanished")
    return x


@dataclass
class CorrectionState:
    """Current rank-one correction: spatial block, factor tables, objective."""

    block: np.ndarray
    factors: list
    objective: float
    trace: list = field(default_factory=list)


def _unit_rms(w):
    s = np.sqrt(np.mean(w * w))
    return w / s if s > 0 else w


def als_sweep(ctx, state):
    """One sweep ``u_X -> u_1 -> ... -> u_p``; returns the updated state.

    ``state.trace`` receives the objective after every half-step.
    """
    factors = [np.array(w, dtype=float) for w in state.factors]
    x = ctx.spatial_solve(factors)
    red = ctx.reduced(x)
    trace = [ctx.value(factors, red)]
    for i in range(len(ctx.shape)):
        w = ctx.update_axis(factors, i, red)
        if not np.any(w) or not np.all(np.isfinite(w)):
            raise _Degenerate(f"all-zero factor on axis {i}")
        factors[i] = w
        trace.append(ctx.value(factors, red))
    return CorrectionState(x, factors, trace[-1], list(state.trace) + trace)


def _initial_state(ctx, rng):
    factors = [_unit_rms(rng.uniform(-1.0, 1.0, s)) for s in ctx.shape]
    return CorrectionState(None, factors, ctx.objective)


def _run_als(ctx, cfg, rank_index):
    base = ctx.objective
    for restart in range(cfg.max_restarts + 1):
        rng = np.random.default_rng([cfg.seed, rank_index, restart])
        state = _initial_state(ctx, rng)
        try:
            prev_gain = None
            for _ in range(cfg.als_sweeps):
                state = als_sweep(ctx, state)
                gain = base - state.objective
                if prev_gain is not None and gain - prev_gain <= cfg.als_stagnation_tol * abs(gain):
                    break
                prev_gain = gain
            return _normalized(state), restart
        except _Degenerate:
            continue
    raise CorrectionRejected(
        f"rank-one correction {rank_index + 1} rejected after {cfg.max_restarts + 1} attempts"
    )


def _normalized(state):
    block = np.array(state.block, dtype=float)
    factors = []
    for w in state.factors:
        s = np.sqrt(np.mean(w * w))
        if not s > 0:
            raise _Degenerate("zero factor")
        factors.append(w / s)
        block = block * s
    return CorrectionState(block, factors, state.objective, state.trace)


class GreedyBuilder:
    """Incremental pure-greedy construction; previous terms are never updated.

    Parameters
    ----------
    op : AffineOperator
    rhs : AffineRHS, n x K array or None (use ``op.rhs``)
    cfg : GreedyConfig
    points : PointSet, optional
        Points of the objective means; overrides ``cfg.sums``.  ``None``
        follows ``cfg.sums``, with ``self.points`` left ``None`` for exact
        full-grid means.
    initial : CanonicalTensor, optional
        Terms to start from.
    """

    def __init__(self, op, rhs=None, cfg=None, points=None, initial=None):
        cfg = cfg or GreedyConfig()
        cfg.check(op)
        rhs = _as_rhs(rhs, op)
        if points is None and cfg.uses_grid(op.grid):
            self.ctx = _GridContext(op, rhs, cfg.formulation)
        else:
            if points is None:
                points = summation_points(op.grid, cfg.n_points, cfg.point_seed)
            self.ctx = _PointContext(op, rhs, points, cfg.formulation)
        self.op, self.rhs, self.cfg, self.points = op, rhs, cfg, points
        self.tensor = CanonicalTensor.zeros(op.grid, op.n, rhs.k_cols)
        self.history = [self.ctx.objective]
        self.sweep_traces = []
        self.restarts = []
        self.rejected = False
        if initial is not None:
            for m in range(initial.rank):
                self._accept(initial.spatial[m], [f[m] for f in initial.factors])
            self.history = [self.exact_objective() if self.ctx.minres else self.ctx.objective]

    @property
    def rank(self):
        return self.tensor.rank

    @property
    def objective(self):
        return self.ctx.objective

    @property
    def zero_objective(self):
        return self.ctx.zero_objective

    def _accept(self, block, factors):
        new = self.ctx.value(factors, self.ctx.reduced(block))
        self.ctx.add_term(block, factors)
        self.ctx.objective = new
        self.tensor = self.tensor.append(block, factors)

    def propose(self):
        """Run ALS for the next correction without accepting it."""
        state, restarts = _run_als(self.ctx, self.cfg, self.rank)
        return state, restarts

    def step(self):
        """Add one correction; returns ``False`` when it was rejected."""
        try:
            state, restarts = self.propose()
        except CorrectionRejected:
            self.rejected = True
            return False
        self._accept(state.block, state.factors)
        self.history.append(self.ctx.objective)
        self.sweep_traces.append(state.trace)
        self.restarts.append(restarts)
        return True

    def exact_objective(self):
        """Objective recomputed from scratch (minimal-residual only)."""
        if not self.ctx.minres:
            raise ValueError("exact evaluation is only available for the residual objective")
        from .residual import ResidualExpansion

        rx = ResidualExpansion(self.op, self.rhs, self.tensor)
        if self.points is not None:
            return float(np.mean(rx.sq_norms(self.points)))
        g = rx.gram()
        fam = [rx_tables(self.op, self.rhs, self.tensor, i) for i in range(self.op.p)]
        mean = None
        for i, t in enumerate(fam):
            m = t @ t.T / self.op.grid.shape[i]
            mean = m if mean is None else mean * m
        c = np.concatenate([np.ones(rx.n_rhs), -np.ones(rx.n_atoms - rx.n_rhs)])
        return float(np.sum(np.outer(c, c) * g * mean))

    def result(self, stopped=None):
        meta = {
            "formulation": self.cfg.formulation,
            "seed": self.cfg.seed,
            "objective_history": list(map(float, self.history)),
            "zero_objective": float(self.zero_objective),
            "n_points": len(self.points) if self.points is not None else None,
            "sums": "grid" if self.points is None else "points",
            "restarts": list(self.restarts),
        }
        if stopped is not None:
            meta["stopped"] = stopped
        return CanonicalTensor(self.tensor.grid, self.tensor.spatial, self.tensor.factors, meta)


def rank_one_correction(op, current, rhs=None, cfg=None, points=None):
    """Rank-one increment for ``current``; raises :class:`CorrectionRejected`."""
    b = GreedyBuilder(op, rhs, cfg, points, initial=current)
    state, _ = b.propose()
    return CanonicalTensor(
        op.grid, state.block[None], [w[None] for w in state.factors],
        {"objective": state.objective, "trace": state.trace},
    )


def greedy_solve(op, rhs=None, cfg=None, stop=None, points=None):
    """Pure greedy PGD up to ``cfg.max_rank`` terms.

    ``stop(M, tensor)`` is called after every accepted correction and ends the
    construction when it returns a falsy value.  The objective history and
    run settings are stored in ``tensor.meta``.
    """
    cfg = cfg or GreedyConfig()
    b = GreedyBuilder(op, rhs, cfg, points)
    reason = "max_rank"
    while b.rank < cfg.max_rank:
        if not b.step():
            reason = "rejected"
            break
        if stop is not None and not stop(b.rank, b.tensor):
            reason = "callback"
            break
    return b.result(reason)


def dual_greedy_solve(op_transposed, z_block, cfg=None, stop=None, points=None):
    """Greedy PGD for ``A(mu)^T Y(mu) = Z`` with a fixed ``n x K`` right-hand side."""
    z = np.asarray(z_block, dtype=float)
    if z.ndim == 1:
        z = z[:, None]
    return greedy_solve(op_transposed, z, cfg, stop, points)
