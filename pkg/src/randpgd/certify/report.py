"""Certification reports, baseline curves and effectivity tables."""

from __future__ import annotations

import csv
import io
import json
import math
from dataclasses import asdict, dataclass, field, replace

import jsonschema
import numpy as np
from scipy import stats

from ..sketch.bounds import f_cdf
from ..sketch.estimators import DENOMINATOR_FLOOR
from .baselines import residual_estimator, stagnation_estimator

__all__ = [
    "IterationRecord",
    "CertificateReport",
    "REPORT_SCHEMA",
    "validate_report",
    "baseline_curves",
    "EffectivityTable",
    "effectivity_report",
    "sqrt_f_cdf",
    "jsonable",
]

_NUMBER = {"oneOf": [{"type": "number"}, {"enum": ["inf", "-inf", "nan"]}]}

REPORT_SCHEMA = {
    "$schema": "https://json-schema.org/draft/2020-12/schema",
    "title": "certificate report",
    "type": "object",
    "required": ["format", "version", "config", "k", "sketch_seed", "stopped", "final", "history"],
    "properties": {
        "format": {"const": "randpgd-certificate"},
        "version": {"const": 1},
        "config": {"type": "object"},
        "k": {"type": "integer", "minimum": 1},
        "sketch_seed": {"type": "integer", "minimum": 0},
        "rng_id": {"type": "string"},
        "stopped": {
            "enum": ["tolerance", "m_max", "primal_rejected", "dual_rank_cap", "dual_rejected"]
        },
        "n_points": {"type": "integer", "minimum": 1},
        "final": {
            "type": "object",
            "required": ["m", "l", "estimate"],
            "properties": {
                "m": {"type": "integer", "minimum": 0},
                "l": {"type": "integer", "minimum": 0},
                "estimate": _NUMBER,
            },
        },
        "history": {
            "type": "array",
            "items": {
                "type": "object",
                "required": ["m", "l", "estimate", "alpha", "alpha_trace"],
                "properties": {
                    "m": {"type": "integer", "minimum": 1},
                    "l": {"type": "integer", "minimum": 1},
                    "estimate": _NUMBER,
                    "alpha": _NUMBER,
                    "alpha_trace": {"type": "array", "items": _NUMBER, "minItems": 1},
                    "increment_exact": _NUMBER,
                    "increment_fast": _NUMBER,
                    "primal_objective": _NUMBER,
                    "dual_objective": _NUMBER,
                },
            },
        },
        "baselines": {
            "type": "object",
            "properties": {
                "m": {"type": "array", "items": {"type": "integer"}},
                "residual": {"type": "array", "items": _NUMBER},
                "stagnation": {"type": "array", "items": _NUMBER},
                "stagnation_k": {"type": "integer"},
            },
        },
        "truth": {"type": "object"},
    },
}


def jsonable(x):
    """Plain JSON values; non-finite floats become the strings ``inf``/``nan``."""
    if isinstance(x, dict):
        return {str(k): jsonable(v) for k, v in x.items()}
    if isinstance(x, (list, tuple)):
        return [jsonable(v) for v in x]
    if isinstance(x, np.ndarray):
        return jsonable(x.tolist())
    if isinstance(x, (bool, np.bool_)):
        return bool(x)
    if isinstance(x, (int, np.integer)):
        return int(x)
    if isinstance(x, (float, np.floating)):
        x = float(x)
        if math.isfinite(x):
            return x
        return "nan" if math.isnan(x) else ("inf" if x > 0 else "-inf")
    return x


def validate_report(data):
    """Raise ``jsonschema.ValidationError`` unless ``data`` is a valid report dict."""
    jsonschema.validate(data, REPORT_SCHEMA)


@dataclass
class IterationRecord:
    """State after one outer iteration."""

    m: int
    l: int
    estimate: float
    alpha: float
    alpha_trace: list
    increment_exact: float = math.nan
    increment_fast: float = math.nan
    primal_objective: float = math.nan
    dual_objective: float = math.nan


@dataclass(frozen=True)
class CertificateReport:
    """Outcome of an intertwined run.

    ``history`` holds one :class:`IterationRecord` per primal rank; ``primal``
    and ``dual`` are the final tensors; ``estimates`` is the last
    estimate bundle.  ``baselines`` and ``truth`` are optional curves attached
    with :meth:`with_curves`.
    """

    config: object
    k: int
    sketch_seed: int
    history: list
    primal: object
    dual: object
    sketch: object
    points: object
    estimates: object = None
    stopped: str = None
    baselines: dict = None
    truth: dict = None
    extra: dict = field(default_factory=dict)

    @property
    def m(self):
        return len(self.history)

    @property
    def l(self):
        return self.history[-1].l if self.history else self.dual.rank

    @property
    def estimate(self):
        return self.history[-1].estimate if self.history else math.inf

    def column(self, name):
        return np.array([getattr(r, name) for r in self.history])

    def with_curves(self, baselines=None, truth=None, **extra):
        return replace(
            self,
            baselines=baselines if baselines is not None else self.baselines,
            truth=truth if truth is not None else self.truth,
            extra=dict(self.extra, **extra),
        )

    def to_dict(self):
        cfg = self.config.to_dict() if hasattr(self.config, "to_dict") else dict(self.config)
        out = {
            "format": "randpgd-certificate",
            "version": 1,
            "config": cfg,
            "k": int(self.k),
            "sketch_seed": int(self.sketch_seed),
            "rng_id": self.sketch.rng_id,
            "stopped": self.stopped,
            "n_points": len(self.points),
            "final": {"m": self.m, "l": int(self.l), "estimate": self.estimate},
            "history": [asdict(r) for r in self.history],
        }
        if self.baselines is not None:
            out["baselines"] = self.baselines
        if self.truth is not None:
            out["truth"] = self.truth
        out.update(self.extra)
        return jsonable(out)

    def to_json(self):
        data = self.to_dict()
        validate_report(data)
        return json.dumps(data, indent=2, sort_keys=True) + "\n"

    def history_csv(self):
        cols = ["m", "l", "estimate", "alpha", "n_alpha", "increment_exact", "increment_fast",
                "primal_objective", "dual_objective"]
        base = self.baselines or {}
        bm = {int(m): j for j, m in enumerate(base.get("m", []))}
        extra = [c for c in ("residual", "stagnation") if c in base]
        truth = self.truth or {}
        has_truth = "rms_rel" in truth
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(cols + extra + (["true"] if has_truth else []))
        for r in self.history:
            row = [r.m, r.l, repr(float(r.estimate)), repr(float(r.alpha)), len(r.alpha_trace),
                   repr(float(r.increment_exact)), repr(float(r.increment_fast)),
                   repr(float(r.primal_objective)), repr(float(r.dual_objective))]
            for c in extra:
                j = bm.get(r.m)
                row.append(repr(float(base[c][j])) if j is not None else "nan")
            if has_truth:
                row.append(repr(float(truth["rms_rel"][r.m])))
            w.writerow(row)
        return buf.getvalue()

    def per_mu_csv(self):
        if self.estimates is None:
            raise ValueError("report holds no estimates")
        return self.estimates.to_csv()


def baseline_curves(op, rhs, tensor, gram=None, points=None, k=5, ranks=None):
    """Residual and stagnation indicators of the prefixes of ``tensor``.

    Stagnation at rank ``M`` compares with the rank ``M + k`` prefix and is
    ``nan`` when ``tensor`` is too short.
    """
    points = op.grid.full() if points is None else points
    ranks = range(1, tensor.rank + 1) if ranks is None else ranks
    res, stag, ms = [], [], []
    for m in ranks:
        u_m = tensor.truncate(m)
        ms.append(int(m))
        res.append(residual_estimator(op, rhs, u_m, gram, points, "rms"))
        if m + k <= tensor.rank:
            stag.append(stagnation_estimator(u_m, tensor.truncate(m + k), gram, points, "rms"))
        else:
            stag.append(math.nan)
    return {"m": ms, "residual": res, "stagnation": stag, "stagnation_k": int(k)}


def sqrt_f_cdf(x, k):
    """CDF of ``sqrt(F)`` with ``F ~ F(K, K)``."""
    x = np.atleast_1d(np.asarray(x, dtype=float))
    return np.array([f_cdf(v * v, k) if v > 0 else 0.0 for v in x])


@dataclass
class EffectivityTable:
    """Effectivities ``eta(mu)`` at the points with a nonzero true error."""

    values: np.ndarray
    rows: np.ndarray
    eta: np.ndarray
    excluded: int
    alpha_inf: float = math.nan
    alpha_2: float = math.nan
    eta_rms: float = math.nan

    def __len__(self):
        return len(self.eta)

    def fraction_within(self, low, high):
        return float(np.mean((self.eta >= low) & (self.eta <= high))) if len(self) else math.nan

    def ks_sqrt_f(self, k):
        """Kolmogorov-Smirnov statistic of ``eta`` against ``sqrt(F(K, K))``."""
        return float(stats.kstest(self.eta, lambda x: sqrt_f_cdf(x, k)).statistic)

    def summary(self):
        return jsonable({
            "count": len(self),
            "excluded": self.excluded,
            "median": float(np.median(self.eta)) if len(self) else math.nan,
            "alpha_inf": self.alpha_inf,
            "alpha_2": self.alpha_2,
            "eta_rms": self.eta_rms,
        })

    def to_csv(self):
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow([f"mu{i}" for i in range(self.values.shape[1])] + ["eta"])
        for j, e in zip(self.rows, self.eta):
            w.writerow([repr(float(x)) for x in self.values[j]] + [repr(float(e))])
        return buf.getvalue()


def _alpha(a, b):
    with np.errstate(divide="ignore", invalid="ignore"):
        r = np.maximum(a / b, b / a)
    return np.where((a > 0) & (b > 0) & np.isfinite(a) & np.isfinite(b), r, np.inf)


def effectivity_report(estimates, truth, exact=None, truth_rms=None):
    """Effectivity table of a relative estimate bundle.

    Parameters
    ----------
    estimates : EstimateBundle
        Typically the fast estimator.
    truth : array (n_points,)
        True relative errors; zero or non-finite entries are excluded and
        counted.
    exact : EstimateBundle, optional
        Sketched true errors; gives ``alpha_inf`` and ``alpha_2``.
    truth_rms : float, optional
        True relative RMS error; gives ``eta_rms``.
    """
    truth = np.asarray(truth, dtype=float)
    if truth.shape != estimates.delta_rel.shape:
        raise ValueError("truth and estimates cover different points")
    keep = np.isfinite(truth) & (truth > math.sqrt(DENOMINATOR_FLOOR))
    rows = np.flatnonzero(keep)
    eta = estimates.delta_rel[rows] / truth[rows]
    table = EffectivityTable(estimates.points.values, rows, eta, int(np.count_nonzero(~keep)))
    if exact is not None:
        a = _alpha(exact.delta_rel, estimates.delta_rel)
        table.alpha_inf = float(np.max(a)) if a.size else math.nan
        table.alpha_2 = float(_alpha(np.array(exact.rms_rel), np.array(estimates.rms_rel)))
    if truth_rms is not None and truth_rms > 0:
        table.eta_rms = float(estimates.rms_rel / truth_rms)
    return table
