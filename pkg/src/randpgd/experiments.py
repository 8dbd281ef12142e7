"""Desk-scale numerical experiments on the benchmark problems.

Every function returns an :class:`ExperimentResult`: named tables (written
as CSV by the command line) and a JSON-ready summary.  Results depend only
on the arguments, so identical calls produce identical tables.
"""

from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass, field

import numpy as np
from scipy import stats

from .certify import (
    IntertwinedConfig,
    baseline_curves,
    effectivity_report,
    intertwined_solve,
    jsonable,
    residual_estimator,
    sqrt_f_cdf,
    stagnation_estimator,
    true_errors,
    truth_solutions,
)
from .linalg import xnorm
from .pgd import GreedyConfig, dual_greedy_solve, greedy_solve
from .problems import harmonic_problem, highdim_problem
from .sketch import ExactDual, SigmaSpec, draw_sketch, exact_estimators, fast_estimators, table1

__all__ = [
    "EXPERIMENTS",
    "Table",
    "ExperimentResult",
    "sqrt_f_pdf",
    "run_table1",
    "run_fig3",
    "run_fig4",
    "run_fig5",
    "run_fig6",
]


def _cell(x):
    if isinstance(x, (bool, np.bool_)):
        return str(int(x))
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    if isinstance(x, (float, np.floating)):
        return repr(float(x))
    return str(x)


@dataclass
class Table:
    """Column names plus rows of numbers or strings."""

    columns: list
    rows: list

    def to_csv(self, header=None):
        """CSV text; ``header`` lines are prefixed with ``#``."""
        buf = io.StringIO()
        for line in header or ():
            buf.write(f"# {line}\n")
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(self.columns)
        for row in self.rows:
            w.writerow([_cell(x) for x in row])
        return buf.getvalue()

    def column(self, name):
        j = self.columns.index(name)
        return np.array([r[j] for r in self.rows])


@dataclass
class ExperimentResult:
    name: str
    params: dict
    tables: dict = field(default_factory=dict)
    summary: dict = field(default_factory=dict)

    def summary_json(self):
        return jsonable({"experiment": self.name, "params": self.params, "summary": self.summary})


def _within(est, truth, factor=2.0):
    est, truth = np.asarray(est, dtype=float), np.asarray(truth, dtype=float)
    return (est >= truth / factor) & (est <= truth * factor)


def sqrt_f_pdf(x, k):
    """Density of ``sqrt(F)`` with ``F ~ F(K, K)``."""
    x = np.asarray(x, dtype=float)
    out = np.zeros_like(x)
    pos = x > 0
    f = x[pos] ** 2
    h = 0.5 * k
    log_beta = 2.0 * math.lgamma(h) - math.lgamma(k)
    log_pdf_f = (h - 1.0) * np.log(f) - k * np.log1p(f) - log_beta
    out[pos] = 2.0 * x[pos] * np.exp(log_pdf_f)
    return out


def run_table1():
    """Minimal sample sizes ``K`` for finite sets (24 rows)."""
    rows = [[d, w, m, k] for d, w, m, k in table1()]
    return ExperimentResult(
        "table1", {}, {"table1": Table(["delta", "w", "cardinality", "K"], rows)},
        {"rows": len(rows)},
    )


def _harmonic(count, mesh=None):
    bench = harmonic_problem(mesh=mesh, count=count)
    return bench, bench.operator, bench.gram


def _relative_errors(truth, approx, gram):
    diff = (truth - approx).T
    return xnorm(diff, gram) / xnorm(truth.T, gram)


def run_fig3(m=10, k=6, l=3, stag_k=3, seed=0, primal_seed=0, count=500, mesh=None,
             dual_sweeps=8, dual_tol=1e-4, cache_dir=None):
    """Per-parameter error curves on the harmonic problem.

    Columns: true relative error, the exact sketched estimate (from direct
    solves), the fast estimate with an ``l``-term dual, the relative residual
    and the stagnation indicator with ``stag_k`` extra terms.
    """
    bench, op, gram = _harmonic(count, mesh)
    pts = op.grid.full()
    truth = truth_solutions(op, None, pts, cache_dir)
    ref = greedy_solve(op, None, GreedyConfig("min_residual", m + stag_k, seed=primal_seed))
    u = ref.truncate(m)
    s = draw_sketch(SigmaSpec.gram(gram), k, seed)
    y = dual_greedy_solve(
        op.transpose(), s.z_block,
        GreedyConfig("min_residual", l, dual_sweeps, dual_tol, seed=seed),
    )
    true_rel = _relative_errors(truth, u.evaluate_points(pts)[:, :, 0], gram)
    exact = exact_estimators(truth, u, s, pts)
    fast = fast_estimators(op, None, u, y, s, pts)
    res = residual_estimator(op, None, u, gram, pts, "per_mu")
    stag = stagnation_estimator(u, ref, gram, pts, "per_mu")
    norms = xnorm(truth.T, gram)
    mu = pts.values[:, 0]
    rows = [list(r) for r in zip(mu, norms, true_rel, exact.delta_rel, fast.delta_rel, res, stag)]
    cols = ["mu", "solution_norm", "true_rel", "exact_rel", "fast_rel", "residual_rel",
            "stagnation_rel"]
    summary = {
        "n_points": len(pts),
        "fraction_exact_within_2": float(np.mean(_within(exact.delta_rel, true_rel))),
        "fraction_fast_within_2": float(np.mean(_within(fast.delta_rel, true_rel))),
        "fraction_residual_within_2": float(np.mean(_within(res, true_rel))),
        "fraction_stagnation_within_2": float(np.mean(_within(stag, true_rel))),
        "exact_rms_rel": exact.rms_rel,
        "fast_rms_rel": fast.rms_rel,
    }
    params = dict(m=m, k=k, l=l, stag_k=stag_k, seed=seed, primal_seed=primal_seed, count=count,
                  dual_sweeps=dual_sweeps, dual_tol=dual_tol)
    return ExperimentResult("fig3", params, {"curves": Table(cols, rows)}, summary)


def run_fig4(k=20, ls=(8, 16), reps=100, m=10, primal_seed=0, seed0=0, count=500, mesh=None,
             dual_sweeps=8, dual_tol=1e-4, bins=60, eta_range=(0.0, 3.0), cache_dir=None,
             keep_raw=False):
    """Effectivity histograms of the fast relative estimator over sketch realizations.

    Each realization ``r`` draws a sketch with seed ``seed0 + r``, builds one
    dual of rank ``max(ls)`` and evaluates every truncation in ``ls``.
    """
    ls = sorted({int(v) for v in ls})
    bench, op, gram = _harmonic(count, mesh)
    pts = op.grid.full()
    truth = truth_solutions(op, None, pts, cache_dir)
    u = greedy_solve(op, None, GreedyConfig("min_residual", m, seed=primal_seed))
    true_rel = _relative_errors(truth, u.evaluate_points(pts)[:, :, 0], gram)
    sigma = SigmaSpec.gram(gram)
    cfg = GreedyConfig("min_residual", max(ls), dual_sweeps, dual_tol)
    etas = {l: [] for l in ls}
    raw = []
    for r in range(reps):
        seed = seed0 + r
        s = draw_sketch(sigma, k, seed)
        y = dual_greedy_solve(op.transpose(), s.z_block, cfg.with_(seed=seed))
        for l in ls:
            tab = effectivity_report(fast_estimators(op, None, u, y.truncate(l), s, pts), true_rel)
            etas[l].append(tab.eta)
            if keep_raw:
                raw.extend([seed, l, int(j), e] for j, e in zip(tab.rows, tab.eta))
    edges = np.linspace(eta_range[0], eta_range[1], bins + 1)
    centers = 0.5 * (edges[:-1] + edges[1:])
    cols = ["bin_low", "bin_high", "center"] + [f"density_L{l}" for l in ls] + ["sqrt_f_density"]
    dens = {}
    summary = {"k": k, "reps": reps, "by_l": {}}
    for l in ls:
        e = np.concatenate(etas[l])
        dens[l], _ = np.histogram(e, bins=edges, density=False)
        dens[l] = dens[l] / (len(e) * np.diff(edges))
        summary["by_l"][str(l)] = {
            "count": int(len(e)),
            "median": float(np.median(e)),
            "fraction_within_2": float(np.mean((e >= 0.5) & (e <= 2.0))),
            "q05": float(np.quantile(e, 0.05)),
            "q95": float(np.quantile(e, 0.95)),
            "ks_sqrt_f": float(stats.kstest(e, lambda x: sqrt_f_cdf(x, k)).statistic),
        }
    pdf = sqrt_f_pdf(centers, k)
    rows = [[edges[j], edges[j + 1], centers[j]] + [dens[l][j] for l in ls] + [pdf[j]]
            for j in range(bins)]
    tables = {"histogram": Table(cols, rows)}
    if keep_raw:
        tables["eta"] = Table(["seed", "l", "mu_index", "eta"], raw)
    params = dict(k=k, ls=ls, reps=reps, m=m, primal_seed=primal_seed, seed0=seed0, count=count,
                  dual_sweeps=dual_sweeps, dual_tol=dual_tol, bins=bins, eta_range=list(eta_range))
    return ExperimentResult("fig4", params, tables, summary)


def run_fig5(seeds=range(10), m_max=50, k=10, alpha=2.0, k_lag=6, stag_k=5, tol=1e-6,
             primal_seed=0, count=500, mesh=None, dual_sweeps=8, dual_tol=1e-4,
             early_lag="zero", skip_first=2, cache_dir=None):
    """Intertwined runs for several sketch seeds against the true error.

    ``within_2`` counts iterations with ``M > skip_first`` whose estimate is
    within a factor two of the true relative RMS error of the same primal.
    Baselines come from one deterministic primal of rank ``m_max + stag_k``
    built with the same settings as the intertwined primal.
    """
    seeds = [int(s) for s in seeds]
    bench, op, gram = _harmonic(count, mesh)
    pts = op.grid.full()
    truth = truth_solutions(op, None, pts, cache_dir)
    sigma = SigmaSpec.gram(gram)
    base_cfg = IntertwinedConfig(
        tol=tol, m_max=m_max, alpha=alpha, k_lag=k_lag, k_sketch=k, seed=primal_seed,
        dual_als_sweeps=dual_sweeps, dual_als_stagnation_tol=dual_tol, early_lag=early_lag,
    )
    ref = greedy_solve(op, None, base_cfg.primal_config().with_(max_rank=m_max + stag_k))
    te_ref = true_errors(truth, ref, gram, pts)
    curves = baseline_curves(op, None, ref, gram, pts, k=stag_k, ranks=range(1, m_max + 1))
    base_rows = [[mm, te_ref.rms_rel[mm], r, s]
                 for mm, r, s in zip(curves["m"], curves["residual"], curves["stagnation"])]

    traj, hits, total, per_seed = [], 0, 0, {}
    for seed in seeds:
        rep = intertwined_solve(op, None, sigma, base_cfg.with_(sketch_seed=seed, dual_seed=seed),
                                pts)
        te = true_errors(truth, rep.primal, gram, pts)
        est = rep.column("estimate")
        true = te.rms_rel[1: len(est) + 1]
        ok = _within(est, true)
        sel = np.arange(1, len(est) + 1) > skip_first
        hits += int(np.sum(ok[sel]))
        total += int(np.sum(sel))
        per_seed[str(seed)] = {
            "m": rep.m, "l": int(rep.l), "stopped": rep.stopped,
            "fraction_within_2": float(np.mean(ok[sel])) if sel.any() else math.nan,
        }
        for r, t, o in zip(rep.history, true, ok):
            traj.append([seed, r.m, r.l, r.estimate, t, r.estimate / t, r.alpha,
                         len(r.alpha_trace), o])
    stag = np.array(curves["stagnation"])
    true_ref = te_ref.rms_rel[1: m_max + 1]
    stag_ok = _within(stag, true_ref)
    summary = {
        "k": k,
        "fraction_within_2": hits / total if total else math.nan,
        "iterations_counted": total,
        "per_seed": per_seed,
        "stagnation_violations": int(np.sum(~stag_ok & np.isfinite(stag))),
        "residual_violations": int(np.sum(~_within(curves["residual"], true_ref))),
    }
    tables = {
        "trajectories": Table(["seed", "m", "l", "estimate", "true", "ratio", "alpha", "n_alpha",
                               "within_2"], traj),
        "baselines": Table(["m", "true", "residual", "stagnation"], base_rows),
    }
    params = dict(seeds=seeds, m_max=m_max, k=k, alpha=alpha, k_lag=k_lag, stag_k=stag_k, tol=tol,
                  primal_seed=primal_seed, count=count, dual_sweeps=dual_sweeps,
                  dual_tol=dual_tol, early_lag=early_lag, skip_first=skip_first)
    return ExperimentResult("fig5", params, tables, summary)


def run_fig6(ls=(1, 3, 5), k=3, m_max=15, stag_k=5, n_eval=200, seed=0, primal_seed=0,
             eval_seed=12345, p=20, count=50, mesh=None, dual_sweeps=4, dual_tol=1e-3,
             cache_dir=None):
    """Convergence monitoring on the high-dimensional problem (Galerkin PGD).

    All curves are relative RMS values over ``n_eval`` grid points drawn
    with ``eval_seed``; the true error and the exact-dual estimate use direct
    solves at those points.
    """
    ls = sorted({int(v) for v in ls})
    bench = highdim_problem(mesh=mesh, p=p, count=count)
    op, gram = bench.operator, bench.gram
    ev = op.grid.sample(n_eval, seed=eval_seed)
    u = greedy_solve(op, None, GreedyConfig("galerkin", m_max + stag_k, seed=primal_seed))
    s = draw_sketch(SigmaSpec.gram(gram), k, seed)
    y = dual_greedy_solve(
        op.transpose(), s.z_block,
        GreedyConfig("galerkin", max(ls), dual_sweeps, dual_tol, seed=seed),
    )
    truth = truth_solutions(op, None, ev, cache_dir)
    te = true_errors(truth, u, gram, ev)
    exact_dual = ExactDual(op, s)
    rows = []
    ratios = {l: [] for l in ls}
    res_ratio = []
    for mm in range(1, m_max + 1):
        um = u.truncate(mm)
        exact = fast_estimators(op, None, um, exact_dual, s, ev).rms_rel
        fast = [fast_estimators(op, None, um, y.truncate(l), s, ev).rms_rel for l in ls]
        res = residual_estimator(op, None, um, gram, ev)
        stag = stagnation_estimator(um, u.truncate(mm + stag_k), gram, ev)
        rows.append([mm, te.rms_rel[mm], exact] + fast + [res, stag])
        for l, f in zip(ls, fast):
            ratios[l].append(f / exact)
        res_ratio.append(res / exact)
    cols = ["m", "true", "exact_rel"] + [f"fast_rel_L{l}" for l in ls] + ["residual", "stagnation"]
    summary = {
        "k": k,
        "max_ratio_to_exact": {
            str(l): float(np.max(np.maximum(r, 1.0 / np.asarray(r)))) for l, r in ratios.items()
        },
        "residual_max_ratio_to_exact": float(
            np.max(np.maximum(res_ratio, 1.0 / np.asarray(res_ratio)))
        ),
    }
    params = dict(ls=ls, k=k, m_max=m_max, stag_k=stag_k, n_eval=n_eval, seed=seed,
                  primal_seed=primal_seed, eval_seed=eval_seed, p=p, count=count,
                  dual_sweeps=dual_sweeps, dual_tol=dual_tol)
    return ExperimentResult("fig6", params, {"convergence": Table(cols, rows)}, summary)


EXPERIMENTS = {
    "table1": run_table1,
    "fig3": run_fig3,
    "fig4": run_fig4,
    "fig5": run_fig5,
    "fig6": run_fig6,
}
