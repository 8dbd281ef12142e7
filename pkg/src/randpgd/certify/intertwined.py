"""Intertwined greedy construction of primal and sketched dual approximations."""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass, replace

from ..pgd.greedy import FORMULATIONS, GreedyBuilder, GreedyConfig, _as_rhs, summation_points
from ..pgd.tensor import CanonicalTensor
from ..sketch.bounds import sample_size
from ..sketch.estimators import fast_estimators
from ..sketch.gaussian import draw_sketch
from .alpha import alpha_2k_parts
from .report import CertificateReport, IterationRecord

__all__ = [
    "IntertwinedConfig",
    "IntertwinedAbort",
    "DualRankExceeded",
    "intertwined_solve",
]

INCREMENTS = ("minus", "plus")
EARLY_LAGS = ("shrink", "zero")


class IntertwinedAbort(ArithmeticError):
    """The loop stopped abnormally; ``report`` holds the state reached."""

    def __init__(self, message, report=None):
        super().__init__(message)
        self.report = report


class DualRankExceeded(IntertwinedAbort):
    """Dual enrichment hit the hard rank cap."""


@dataclass(frozen=True)
class IntertwinedConfig:
    """Settings of the intertwined loop.

    Parameters
    ----------
    tol : float
        Target for the relative RMS estimate.
    delta : float
        Failure probability used to size the sketch.
    m_max : int
        Maximal primal rank.
    w : float
        Effectivity factor, ``w > e``.
    alpha : float
        Dual enrichment continues while ``alpha_{2,k}`` exceeds this value.
    k_lag : int
        Number of primal increments entering ``alpha_{2,k}``.
    increment : {"minus", "plus"}
        Lagged increment ``u~^M - u~^{M-k}`` (no extra work) or lookahead
        ``u~^{M+k} - u~^M`` (``k`` extra primal corrections).
    early_lag : {"shrink", "zero"}
        Lagged increment while ``M <= k``: ``"zero"`` compares with the zero
        tensor, which makes ``alpha_{2,k}`` identically one; ``"shrink"`` uses
        the lag ``M - 1`` instead (the zero tensor only at ``M = 1``).
    k_sketch : int, optional
        Fixed number of sketch vectors instead of the union-bound size.
    l_max : int, optional
        Hard cap on the dual rank, default ``4 * m_max``.
    seed, sketch_seed, dual_seed : int
        Primal ALS initialization, Gaussian vectors and dual ALS
        initialization; ``None`` reuses ``seed``.
    n_points, point_seed : int
        Estimator points: the full grid up to ``10**6`` points, otherwise a
        seeded subsample (default ``10**4``).
    sums : {"auto", "points", "grid"}
        Means of the ALS objectives, see :class:`GreedyConfig`.
    """

    tol: float = 1e-2
    delta: float = 1e-2
    m_max: int = 20
    w: float = 4.0
    alpha: float = 2.0
    k_lag: int = 6
    increment: str = "minus"
    early_lag: str = "zero"
    primal_formulation: str = "min_residual"
    dual_formulation: str = "min_residual"
    k_sketch: int = None
    l_max: int = None
    seed: int = 0
    sketch_seed: int = None
    dual_seed: int = None
    als_sweeps: int = 4
    als_stagnation_tol: float = 1e-3
    dual_als_sweeps: int = 4
    dual_als_stagnation_tol: float = 1e-3
    max_restarts: int = 3
    n_points: int = None
    point_seed: int = 0
    sums: str = "auto"

    def __post_init__(self):
        if not self.tol > 0:
            raise ValueError("tol must be positive")
        if not 0.0 < self.delta < 1.0:
            raise ValueError("delta must lie in (0, 1)")
        if self.m_max < 1:
            raise ValueError("m_max must be at least 1")
        if not self.w > math.e:
            raise ValueError(f"w must exceed e, got {self.w}")
        if not self.alpha > 1.0:
            raise ValueError(f"alpha must exceed 1, got {self.alpha}")
        if self.k_lag < 1:
            raise ValueError("k_lag must be at least 1")
        if self.early_lag not in EARLY_LAGS:
            raise ValueError(f"early_lag must be one of {EARLY_LAGS}")
        if self.increment not in INCREMENTS:
            raise ValueError(f"increment must be one of {INCREMENTS}")
        for name in ("primal_formulation", "dual_formulation"):
            if getattr(self, name) not in FORMULATIONS:
                raise ValueError(f"{name} must be one of {FORMULATIONS}")
        if self.k_sketch is not None and self.k_sketch < 1:
            raise ValueError("k_sketch must be at least 1")
        if self.l_max is not None and self.l_max < 1:
            raise ValueError("l_max must be at least 1")

    @property
    def dual_rank_cap(self):
        return self.l_max if self.l_max is not None else 4 * self.m_max

    def sketch_size(self, cardinality):
        if self.k_sketch is not None:
            return int(self.k_sketch)
        return sample_size(self.delta, self.w, cardinality, "relative", self.m_max)

    def primal_config(self):
        return GreedyConfig(
            self.primal_formulation, self.m_max, self.als_sweeps, self.als_stagnation_tol,
            self.seed, self.max_restarts, self.n_points, self.point_seed, self.sums,
        )

    def dual_config(self):
        seed = self.seed if self.dual_seed is None else self.dual_seed
        return GreedyConfig(
            self.dual_formulation, self.dual_rank_cap, self.dual_als_sweeps,
            self.dual_als_stagnation_tol, seed, self.max_restarts, self.n_points,
            self.point_seed, self.sums,
        )

    def with_(self, **kw):
        return replace(self, **kw)

    def to_dict(self):
        return asdict(self)


def intertwined_solve(op, rhs, sigma, cfg=None, points=None):
    """Primal greedy PGD with a dual approximation enriched until it is trusted.

    Each outer iteration adds one primal correction, then adds dual
    corrections while ``alpha_{2,k}`` exceeds ``cfg.alpha`` and finally
    updates the relative RMS estimate.  The loop ends when the estimate is at
    most ``cfg.tol`` or the primal rank reaches ``cfg.m_max``.

    Parameters
    ----------
    op : AffineOperator
    rhs : AffineRHS, n x 1 array or None
    sigma : SigmaSpec
    cfg : IntertwinedConfig
    points : PointSet, optional
        Points of the estimates and of the ALS objectives (default: full grid
        or seeded subsample for the estimates, ``cfg.sums`` for the ALS).

    Returns
    -------
    CertificateReport

    Raises
    ------
    DualRankExceeded
        When the dual rank would exceed ``cfg.dual_rank_cap``.
    """
    cfg = cfg or IntertwinedConfig()
    rhs = _as_rhs(rhs, op)
    if rhs.k_cols != 1:
        raise ValueError("the intertwined loop needs a single right-hand side")
    if sigma.n != op.n:
        raise ValueError(f"Sigma has dimension {sigma.n}, operator {op.n}")
    als_points = points
    if points is None:
        points = summation_points(op.grid, cfg.n_points, cfg.point_seed)
    k = cfg.sketch_size(op.grid.cardinality)
    sketch_seed = cfg.seed if cfg.sketch_seed is None else cfg.sketch_seed
    s = draw_sketch(sigma, k, sketch_seed)

    primal = GreedyBuilder(op, rhs, cfg.primal_config(), als_points)
    dual = GreedyBuilder(op.transpose(), s.z_block, cfg.dual_config(), als_points)
    history = []
    lookahead = cfg.k_lag if cfg.increment == "plus" else 0

    def report(stopped, bundle=None):
        m = len(history)
        u = primal.result(stopped)
        meta = dict(u.meta, objective_history=u.meta["objective_history"][: m + 1])
        u = CanonicalTensor(u.grid, u.spatial[:m], [f[:m] for f in u.factors], meta)
        return CertificateReport(
            config=cfg,
            k=k,
            sketch_seed=sketch_seed,
            history=list(history),
            primal=u,
            dual=dual.result(stopped),
            sketch=s,
            points=points,
            estimates=bundle,
            stopped=stopped,
        )

    def enrich_dual():
        if dual.rank >= cfg.dual_rank_cap:
            raise DualRankExceeded(
                f"dual rank cap {cfg.dual_rank_cap} reached at primal rank {len(history) + 1}",
                report("dual_rank_cap"),
            )
        if not dual.step():
            raise IntertwinedAbort(
                f"dual correction {dual.rank + 1} rejected", report("dual_rejected")
            )

    enrich_dual()  # L = 1 before the first check
    estimate = 2.0 * cfg.tol
    bundle = None
    stopped = "m_max"
    m = 0
    while estimate > cfg.tol and m < cfg.m_max:
        while primal.rank < m + 1 + lookahead:
            if not primal.step():
                break
        if primal.rank < m + 1:
            stopped = "primal_rejected"
            break
        m += 1
        u_m = primal.tensor.truncate(m)
        u_ref = primal.tensor if lookahead else None
        kk = cfg.k_lag
        if not lookahead and cfg.early_lag == "shrink" and m <= kk:
            kk = max(1, m - 1)

        a, ex, fa = alpha_2k_parts(u_m, dual.tensor, op, rhs, s, points, kk, u_ref)
        trace = [a]
        while a > cfg.alpha:
            enrich_dual()
            a, ex, fa = alpha_2k_parts(u_m, dual.tensor, op, rhs, s, points, kk, u_ref)
            trace.append(a)
        bundle = fast_estimators(op, rhs, u_m, dual.tensor, s, points)
        estimate = bundle.rms_rel
        history.append(
            IterationRecord(
                m=m,
                l=dual.rank,
                estimate=float(estimate),
                alpha=float(a),
                alpha_trace=[float(x) for x in trace],
                increment_exact=float(ex),
                increment_fast=float(fa),
                primal_objective=float(primal.history[m]),
                dual_objective=float(dual.objective),
            )
        )
    else:
        stopped = "tolerance" if estimate <= cfg.tol else "m_max"
    return report(stopped, bundle)
