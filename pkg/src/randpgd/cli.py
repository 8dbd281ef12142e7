"""Command line: ``randpgd solve | certify | estimate | bench | export``.

Settings come from an INI file (``--config``) with sections ``problem``,
``pgd``, ``sketch``, ``intertwined`` and ``run``; command flags override
file values.  Output files land in ``<root>/<name>`` where the root is
``--output-root``, else ``$RANDPGD_OUTPUT_ROOT``, else ``[run] output``,
else ``./randpgd-out``.  Every file carries a provenance header (version,
command, config hash, seed) and contains no timestamps, so reruns with the
same settings are byte-identical.

Exit codes: 0 success, 1 numerical failure, 2 usage error, 3 dual rank cap
reached.  Failures also print one JSON object on stderr.
"""

from __future__ import annotations

import configparser
import hashlib
import json
import os
import sys
from dataclasses import dataclass
from pathlib import Path

import click
import numpy as np

from . import __version__
from .certify import (
    DualRankExceeded,
    IntertwinedAbort,
    IntertwinedConfig,
    baseline_curves,
    effectivity_report,
    intertwined_solve,
    jsonable,
    residual_estimator,
    truth_solutions,
)
from .experiments import EXPERIMENTS
from .pgd import GreedyConfig, dual_greedy_solve, greedy_solve, load_tensor, save_tensor
from .pgd.greedy import summation_points
from .problems import MeshSpec, export_problem, harmonic_problem, highdim_problem, load_external
from .sketch import SigmaSpec, draw_sketch, exact_estimators, fast_estimators, save_sketch

__all__ = ["OUTPUT_ENV", "EXIT_CODES", "RunConfig", "cli", "main"]

OUTPUT_ENV = "RANDPGD_OUTPUT_ROOT"
DEFAULT_OUTPUT = "randpgd-out"
EXIT_CODES = {"ok": 0, "numerical": 1, "usage": 2, "rank_cap": 3}
SIGMAS = ("gram", "identity", "l2")

# section -> key -> (type, default); ``None`` defaults mean "problem/derived default"
SCHEMA = {
    "problem": {
        "name": (str, "harmonic"),
        "count": (int, None),
        "nx": (int, 49),
        "ny": (int, 14),
        "p": (int, 20),
        "n_points": (int, None),
    },
    "pgd": {
        "formulation": (str, "min_residual"),
        "rank": (int, 10),
        "als_sweeps": (int, 4),
        "als_stagnation_tol": (float, 1e-3),
        "sums": (str, "auto"),
    },
    "sketch": {
        "sigma": (str, "gram"),
        "k": (int, None),
        "delta": (float, 1e-2),
        "w": (float, 4.0),
        "l": (int, 8),
        "dual_als_sweeps": (int, 8),
        "dual_als_stagnation_tol": (float, 1e-4),
    },
    "intertwined": {
        "tol": (float, 1e-2),
        "m_max": (int, 20),
        "alpha": (float, 2.0),
        "k_lag": (int, 6),
        "increment": (str, "minus"),
        "early_lag": (str, "zero"),
        "l_max": (int, None),
    },
    "run": {
        "seed": (int, 0),
        "mode": (str, "serial"),
        "output": (str, None),
    },
}


class UsageFailure(click.UsageError):
    pass


@dataclass(frozen=True)
class RunConfig:
    """Resolved settings; ``values[section][key]``."""

    values: dict

    @classmethod
    def defaults(cls):
        return cls({s: {k: d for k, (_, d) in keys.items()} for s, keys in SCHEMA.items()})

    @classmethod
    def from_file(cls, path):
        parser = configparser.ConfigParser()
        if not parser.read(path):
            raise UsageFailure(f"cannot read config file {path}")
        cfg = cls.defaults()
        for section in parser.sections():
            if section not in SCHEMA:
                raise UsageFailure(f"{path}: unknown section [{section}]")
            for key, raw in parser.items(section):
                cfg = cfg.override(section, **{key: _parse(section, key, raw)})
        return cfg

    def override(self, section, **kw):
        values = {s: dict(v) for s, v in self.values.items()}
        for key, value in kw.items():
            if key not in SCHEMA[section]:
                raise UsageFailure(f"unknown setting {section}.{key}")
            if value is not None:
                values[section][key] = value
        return RunConfig(values)

    def __getitem__(self, section):
        return self.values[section]

    def digest(self):
        text = json.dumps(jsonable(self.values), sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(text.encode()).hexdigest()

    def seed(self):
        return int(self["run"]["seed"])


def _parse(section, key, raw):
    if key not in SCHEMA[section]:
        raise UsageFailure(f"unknown setting {section}.{key}")
    typ = SCHEMA[section][key][0]
    raw = raw.strip()
    if raw.lower() in ("", "none"):
        return None
    try:
        return typ(raw)
    except ValueError:
        raise UsageFailure(f"{section}.{key}: cannot parse {raw!r} as {typ.__name__}") from None


# ---------------------------------------------------------------------------
# problems and output


def build_problem(cfg):
    """``(op, gram, mass)`` for the configured problem (``mass`` may be ``None``)."""
    p = cfg["problem"]
    name = p["name"]
    if name in ("harmonic", "highdim"):
        mesh = MeshSpec(nx=p["nx"], ny=p["ny"])
        if name == "harmonic":
            bench = harmonic_problem(mesh=mesh, count=p["count"] or 500)
        else:
            bench = highdim_problem(mesh=mesh, p=p["p"], count=p["count"] or 50)
        return bench.operator, bench.gram, bench.mass
    path = Path(name)
    if not path.exists():
        raise UsageFailure(f"unknown problem {name!r}: not a built-in name or a manifest file")
    op, gram = load_external(path)
    return op, gram, None


def _sigma(cfg, op, gram, mass):
    kind = cfg["sketch"]["sigma"]
    if kind == "gram":
        if gram is None:
            raise UsageFailure("sigma = gram needs a problem with a Gram matrix")
        return SigmaSpec.gram(gram)
    if kind == "identity":
        return SigmaSpec.identity(op.n)
    if kind == "l2":
        if mass is None:
            raise UsageFailure("sigma = l2 is only available for the built-in problems")
        return SigmaSpec("l2", matrix=mass)
    raise UsageFailure(f"sigma must be one of {SIGMAS}")


def _greedy_config(cfg, rank=None):
    g = cfg["pgd"]
    return GreedyConfig(
        g["formulation"], g["rank"] if rank is None else rank, g["als_sweeps"],
        g["als_stagnation_tol"], cfg.seed(), n_points=cfg["problem"]["n_points"], sums=g["sums"],
    )


def _dual_config(cfg, rank, seed):
    s = cfg["sketch"]
    return GreedyConfig(
        cfg["pgd"]["formulation"], rank, s["dual_als_sweeps"], s["dual_als_stagnation_tol"], seed,
        n_points=cfg["problem"]["n_points"], sums=cfg["pgd"]["sums"],
    )


class Output:
    """Writes provenance-stamped files below one directory."""

    def __init__(self, directory, command, cfg, extra=None):
        self.dir = Path(directory)
        self.dir.mkdir(parents=True, exist_ok=True)
        self.provenance = {
            "version": __version__,
            "command": command,
            "config_sha256": cfg.digest(),
            "seed": cfg.seed(),
            **(extra or {}),
        }
        self.written = []

    def header(self):
        return [f"randpgd {self.provenance['version']}"] + [
            f"{k}: {v}" for k, v in self.provenance.items() if k != "version"
        ]

    def _path(self, name):
        path = self.dir / name
        self.written.append(str(path))
        return path

    def text(self, name, text):
        self._path(name).write_text(text)

    def csv(self, name, body):
        head = "".join(f"# {line}\n" for line in self.header())
        self.text(name, head + body)

    def json(self, name, data):
        data = dict(jsonable(data), provenance=self.provenance)
        self.text(name, json.dumps(data, indent=2, sort_keys=True) + "\n")

    def tensor(self, name, t):
        t.meta["provenance"] = dict(self.provenance)
        path = self._path(name)
        save_tensor(t, path)
        self.written.append(str(path) + ".json")


def _output_root(ctx, cfg):
    root = ctx.obj.get("output_root") or os.environ.get(OUTPUT_ENV) or cfg["run"]["output"]
    return Path(root or DEFAULT_OUTPUT)


def _resolve(ctx, **sections):
    cfg = ctx.obj["config"]
    for section, kw in sections.items():
        cfg = cfg.override(section, **kw)
    if cfg["run"]["mode"] != "serial":
        raise UsageFailure("only run.mode = serial is available")
    return cfg


def _open_output(ctx, cfg, command, name, extra=None):
    out = Output(_output_root(ctx, cfg) / (name or command), command, cfg, extra)
    return out


def _done(out):
    click.echo(json.dumps({"status": "ok", "files": out.written}, sort_keys=True))


def _history_csv(objectives):
    lines = ["rank,objective"] + [f"{m},{float(v)!r}" for m, v in enumerate(objectives)]
    return "\n".join(lines) + "\n"


# ---------------------------------------------------------------------------
# commands

_problem_options = [
    click.option("--problem", "problem_name", help="harmonic, highdim or a manifest path."),
    click.option("--count", type=int, help="Grid points per parameter axis."),
    click.option("--nx", type=int, help="Mesh elements along x."),
    click.option("--ny", type=int, help="Mesh elements along y."),
    click.option("--axes", "p", type=int, help="Parameter axes of the highdim problem."),
    click.option("--n-points", type=int, help="Subsample size for grid sums."),
]


def problem_options(f):
    for opt in reversed(_problem_options):
        f = opt(f)
    return f


def _problem_kw(problem_name, count, nx, ny, p, n_points):
    return dict(name=problem_name, count=count, nx=nx, ny=ny, p=p, n_points=n_points)


@click.group()
@click.version_option(__version__, prog_name="randpgd")
@click.option("--config", "config_path", type=click.Path(dir_okay=False),
              help="INI file with [problem], [pgd], [sketch], [intertwined], [run].")
@click.option("--output-root", type=click.Path(file_okay=False),
              help=f"Output root (overrides ${OUTPUT_ENV}).")
@click.pass_context
def cli(ctx, config_path, output_root):
    """Low-rank parametric solves with randomized error certificates."""
    cfg = RunConfig.from_file(config_path) if config_path else RunConfig.defaults()
    ctx.obj = {"config": cfg, "output_root": output_root}


@cli.command()
@problem_options
@click.option("--rank", type=int, help="Number of greedy corrections.")
@click.option("--formulation", type=click.Choice(["min_residual", "galerkin"]))
@click.option("--sweeps", "als_sweeps", type=int, help="Maximum ALS sweeps per correction.")
@click.option("--als-tol", "als_stagnation_tol", type=float)
@click.option("--seed", type=int)
@click.option("--name", help="Output subdirectory (default: solve).")
@click.pass_context
def solve(ctx, problem_name, count, nx, ny, p, n_points, rank, formulation, als_sweeps,
          als_stagnation_tol, seed, name):
    """Greedy PGD solve; writes the tensor and its objective history."""
    cfg = _resolve(
        ctx, problem=_problem_kw(problem_name, count, nx, ny, p, n_points),
        pgd=dict(rank=rank, formulation=formulation, als_sweeps=als_sweeps,
                 als_stagnation_tol=als_stagnation_tol),
        run=dict(seed=seed),
    )
    if cfg["pgd"]["rank"] < 0:
        raise UsageFailure("--rank must be nonnegative")
    op, gram, _ = build_problem(cfg)
    u = greedy_solve(op, None, _greedy_config(cfg))
    out = _open_output(ctx, cfg, "solve", name)
    out.tensor("tensor.pgdt", u)
    out.csv("history.csv", _history_csv(u.meta["objective_history"]))
    _done(out)


@cli.command()
@problem_options
@click.option("--tol", type=float, help="Target relative RMS error.")
@click.option("--delta", type=float, help="Failure probability.")
@click.option("--w", type=float, help="Effectivity factor (> e).")
@click.option("--alpha", type=float, help="Dual-quality threshold (> 1).")
@click.option("--k-lag", type=int, help="Increments entering alpha_{2,k}.")
@click.option("--m-max", type=int, help="Maximal primal rank.")
@click.option("--l-max", type=int, help="Hard cap on the dual rank (default 4 m_max).")
@click.option("--K", "k", type=int, help="Fixed sketch size instead of the union bound.")
@click.option("--increment", type=click.Choice(["minus", "plus"]))
@click.option("--formulation", type=click.Choice(["min_residual", "galerkin"]))
@click.option("--sigma", type=click.Choice(SIGMAS))
@click.option("--seed", type=int)
@click.option("--baselines/--no-baselines", default=False,
              help="Attach residual and stagnation curves (k = 5).")
@click.option("--truth/--no-truth", default=False, help="Attach true errors (direct solves).")
@click.option("--name", help="Output subdirectory (default: certify).")
@click.pass_context
def certify(ctx, problem_name, count, nx, ny, p, n_points, tol, delta, w, alpha, k_lag, m_max,
            l_max, k, increment, formulation, sigma, seed, baselines, truth, name):
    """Intertwined primal-dual run; writes the certificate report."""
    cfg = _resolve(
        ctx, problem=_problem_kw(problem_name, count, nx, ny, p, n_points),
        pgd=dict(formulation=formulation),
        sketch=dict(delta=delta, w=w, k=k, sigma=sigma),
        intertwined=dict(tol=tol, alpha=alpha, k_lag=k_lag, m_max=m_max, l_max=l_max,
                         increment=increment),
        run=dict(seed=seed),
    )
    op, gram, mass = build_problem(cfg)
    it, s, g = cfg["intertwined"], cfg["sketch"], cfg["pgd"]
    try:
        icfg = IntertwinedConfig(
            tol=it["tol"], delta=s["delta"], m_max=it["m_max"], w=s["w"], alpha=it["alpha"],
            k_lag=it["k_lag"], increment=it["increment"], early_lag=it["early_lag"],
            primal_formulation=g["formulation"], dual_formulation=g["formulation"],
            k_sketch=s["k"], l_max=it["l_max"], seed=cfg.seed(), als_sweeps=g["als_sweeps"],
            als_stagnation_tol=g["als_stagnation_tol"], dual_als_sweeps=s["dual_als_sweeps"],
            dual_als_stagnation_tol=s["dual_als_stagnation_tol"],
            n_points=cfg["problem"]["n_points"], sums=g["sums"],
        )
        GreedyConfig(g["formulation"]).check(op)
    except ValueError as exc:
        raise UsageFailure(str(exc)) from None
    sig = _sigma(cfg, op, gram, mass)
    out = _open_output(ctx, cfg, "certify", name)
    try:
        rep = intertwined_solve(op, None, sig, icfg)
    except DualRankExceeded as exc:
        _write_report(out, exc.report, op, gram, False, False)
        raise
    _write_report(out, rep, op, gram, baselines, truth)
    _done(out)


def _write_report(out, rep, op, gram, baselines, truth):
    extra = {}
    if baselines and rep.primal.rank:
        ref = greedy_solve(op, None, rep.config.primal_config().with_(max_rank=rep.m + 5))
        extra["baselines"] = baseline_curves(op, None, ref, gram, rep.points, k=5,
                                             ranks=range(1, rep.m + 1))
    if truth and rep.primal.rank:
        from .certify import true_errors

        tr = truth_solutions(op, None, rep.points)
        te = true_errors(tr, rep.primal, gram, rep.points)
        extra["truth"] = {"rms_rel": te.rms_rel.tolist()}
    rep = rep.with_curves(provenance=out.provenance, **extra)
    out.text("report.json", rep.to_json())
    out.csv("history.csv", rep.history_csv())
    if rep.estimates is not None:
        out.csv("per_mu.csv", rep.per_mu_csv())
    out.tensor("primal.pgdt", rep.primal)
    out.tensor("dual.pgdt", rep.dual)
    save_sketch(rep.sketch, out._path("sketch.json"))


@cli.command()
@problem_options
@click.option("--tensor", "tensor_path", required=True, type=click.Path(exists=True,
              dir_okay=False), help="Primal tensor written by `solve`.")
@click.option("--K", "k", type=int, help="Sketch size (default: union bound).")
@click.option("--L", "l", type=int, help="Dual rank.")
@click.option("--delta", type=float)
@click.option("--w", type=float)
@click.option("--sigma", type=click.Choice(SIGMAS))
@click.option("--seed", type=int, help="Sketch and dual ALS seed.")
@click.option("--truth/--no-truth", default=False,
              help="Also compute the exact sketched estimate and effectivities.")
@click.option("--name", help="Output subdirectory (default: estimate).")
@click.pass_context
def estimate(ctx, problem_name, count, nx, ny, p, n_points, tensor_path, k, l, delta, w, sigma,
             seed, truth, name):
    """Fast randomized error estimates of a saved tensor."""
    cfg = _resolve(
        ctx, problem=_problem_kw(problem_name, count, nx, ny, p, n_points),
        sketch=dict(k=k, l=l, delta=delta, w=w, sigma=sigma), run=dict(seed=seed),
    )
    op, gram, mass = build_problem(cfg)
    u = load_tensor(tensor_path)
    if u.grid != op.grid or u.n != op.n:
        raise UsageFailure("the tensor does not belong to the configured problem")
    s_cfg = cfg["sketch"]
    try:
        from .sketch import sample_size

        kk = s_cfg["k"] or sample_size(s_cfg["delta"], s_cfg["w"], op.grid.cardinality,
                                       "relative")
    except ValueError as exc:
        raise UsageFailure(str(exc)) from None
    sk = draw_sketch(_sigma(cfg, op, gram, mass), kk, cfg.seed())
    y = dual_greedy_solve(op.transpose(), sk.z_block, _dual_config(cfg, s_cfg["l"], cfg.seed()))
    pts = summation_points(op.grid, cfg["problem"]["n_points"])
    fast = fast_estimators(op, None, u, y, sk, pts)
    extra = {"residual_rel": residual_estimator(op, None, u, gram, pts, "per_mu")}
    summary = {"fast": fast.summary(), "dual_rank": y.rank, "tensor_rank": u.rank}
    if truth:
        tr = truth_solutions(op, None, pts)
        ex = exact_estimators(tr, u, sk, pts)
        extra["exact_delta_rel"] = ex.delta_rel
        summary["exact"] = ex.summary()
        from .certify import true_errors

        te = true_errors(tr, u, gram, pts)
        extra["true_rel"] = te.per_mu_rel
        summary["effectivity"] = effectivity_report(fast, te.per_mu_rel, ex,
                                                    te.rms_rel[-1]).summary()
    out = _open_output(ctx, cfg, "estimate", name, {"tensor": Path(tensor_path).name})
    out.csv("per_mu.csv", fast.to_csv(extra))
    out.json("summary.json", summary)
    _done(out)


@cli.command()
@click.argument("experiment", type=click.Choice(sorted(EXPERIMENTS)))
@click.option("--K", "k", type=int, help="Sketch size.")
@click.option("--L", "ls", type=int, multiple=True, help="Dual rank(s); repeatable.")
@click.option("--M", "m", type=int, help="Primal rank (fig3, fig4) or m_max (fig5, fig6).")
@click.option("--reps", type=int, help="Sketch realizations (fig4).")
@click.option("--seeds", type=int, help="Number of seeds 0..n-1 (fig5).")
@click.option("--count", type=int, help="Grid points per axis.")
@click.option("--nx", type=int)
@click.option("--ny", type=int)
@click.option("--seed", type=int, help="Base seed.")
@click.option("--raw/--no-raw", default=False, help="Also write raw effectivities (fig4).")
@click.option("--name", help="Output subdirectory (default: bench-<experiment>).")
@click.pass_context
def bench(ctx, experiment, k, ls, m, reps, seeds, count, nx, ny, seed, raw, name):
    """Reproduce the data of one experiment (table1, fig3, fig4, fig5, fig6)."""
    cfg = _resolve(ctx, problem=dict(count=count, nx=nx, ny=ny), run=dict(seed=seed))
    kw = {}
    if experiment != "table1":
        pr = cfg["problem"]
        if nx is not None or ny is not None or (pr["nx"], pr["ny"]) != (49, 14):
            kw["mesh"] = MeshSpec(nx=pr["nx"], ny=pr["ny"])
        if pr["count"] is not None:
            kw["count"] = pr["count"]
        if k is not None:
            kw["k"] = k
    sd = cfg.seed()
    if experiment == "fig3":
        kw.update(seed=sd)
        if ls:
            kw["l"] = ls[0]
        if m is not None:
            kw["m"] = m
    elif experiment == "fig4":
        kw.update(seed0=sd, keep_raw=raw)
        if ls:
            kw["ls"] = ls
        if m is not None:
            kw["m"] = m
        if reps is not None:
            kw["reps"] = reps
    elif experiment == "fig5":
        kw["seeds"] = range(sd, sd + (seeds if seeds is not None else 10))
        if m is not None:
            kw["m_max"] = m
    elif experiment == "fig6":
        kw.update(seed=sd)
        if ls:
            kw["ls"] = ls
        if m is not None:
            kw["m_max"] = m
    if reps is not None and experiment != "fig4":
        raise UsageFailure("--reps is only used by fig4")
    if seeds is not None and experiment != "fig5":
        raise UsageFailure("--seeds is only used by fig5")
    result = EXPERIMENTS[experiment](**kw)
    params = json.dumps(result.summary_json()["params"], sort_keys=True, separators=(",", ":"))
    out = _open_output(ctx, cfg, "bench", name or f"bench-{experiment}", {
        "experiment": experiment,
        "params_sha256": hashlib.sha256(params.encode()).hexdigest(),
    })
    for tname, table in result.tables.items():
        out.csv(f"{tname}.csv", table.to_csv())
    out.json("summary.json", result.summary_json())
    _done(out)


@cli.group()
def export():
    """Export problems and tensors to plain files."""


@export.command("problem")
@problem_options
@click.option("--name", help="Output subdirectory (default: export-problem).")
@click.pass_context
def export_problem_cmd(ctx, problem_name, count, nx, ny, p, n_points, name):
    """Matrix Market terms, per-axis CSV tables and a JSON manifest."""
    cfg = _resolve(ctx, problem=_problem_kw(problem_name, count, nx, ny, p, n_points))
    op, gram, _ = build_problem(cfg)
    out = _open_output(ctx, cfg, "export-problem", name or "export-problem")
    path = export_problem(op, gram, out.dir)
    out.written.append(str(path))
    out.json("provenance.json", {"manifest": Path(path).name})
    _done(out)


@export.command("tensor")
@click.argument("tensor_path", type=click.Path(exists=True, dir_okay=False))
@click.option("--name", help="Output subdirectory (default: export-tensor).")
@click.pass_context
def export_tensor_cmd(ctx, tensor_path, name):
    """Spatial blocks and parameter factors of a saved tensor as CSV."""
    cfg = _resolve(ctx)
    t = load_tensor(tensor_path)
    out = _open_output(ctx, cfg, "export-tensor", name or "export-tensor",
                       {"tensor": Path(tensor_path).name})
    cols = [f"m{j}_k{c}" for j in range(t.rank) for c in range(t.k_cols)]
    spatial = t.spatial.transpose(1, 0, 2).reshape(t.n, -1)
    out.csv("spatial.csv", _matrix_csv(["row"] + cols, np.arange(t.n), spatial))
    for i in range(t.p):
        out.csv(f"factors_axis{i}.csv", _matrix_csv(
            ["value"] + [f"m{j}" for j in range(t.rank)], t.grid.axes[i], t.factors[i].T))
    out.json("tensor.json", {"n": t.n, "p": t.p, "k_cols": t.k_cols, "rank": t.rank,
                             "meta": {k: v for k, v in t.meta.items() if k != "provenance"}})
    _done(out)


def _matrix_csv(columns, first, body):
    lines = [",".join(columns)]
    for x, row in zip(first, body):
        lead = str(int(x)) if isinstance(x, (int, np.integer)) else repr(float(x))
        lines.append(",".join([lead] + [repr(float(v)) for v in row]))
    return "\n".join(lines) + "\n"


# ---------------------------------------------------------------------------
# entry point


def _fail(kind, exc, code):
    msg = {"status": "error", "error": kind, "message": str(exc), "exit_code": code}
    if getattr(exc, "report", None) is not None:
        msg["m"] = exc.report.m
        msg["l"] = int(exc.report.l)
    click.echo(json.dumps(msg, sort_keys=True), err=True)
    return code


def main(argv=None):
    """Console entry point; returns the process exit code."""
    try:
        rv = cli.main(args=argv, prog_name="randpgd", standalone_mode=False)
        return rv if isinstance(rv, int) else 0
    except click.exceptions.Exit as exc:
        return exc.exit_code
    except click.UsageError as exc:
        return _fail("usage", exc.format_message(), EXIT_CODES["usage"])
    except click.ClickException as exc:
        return _fail("usage", exc.format_message(), EXIT_CODES["usage"])
    except click.exceptions.Abort as exc:
        return _fail("aborted", exc, EXIT_CODES["numerical"])
    except DualRankExceeded as exc:
        return _fail("dual_rank_cap", exc, EXIT_CODES["rank_cap"])
    except IntertwinedAbort as exc:
        return _fail("numerical", exc, EXIT_CODES["numerical"])
    except (ArithmeticError, np.linalg.LinAlgError) as exc:
        return _fail("numerical", exc, EXIT_CODES["numerical"])
    except (ValueError, OSError) as exc:
        return _fail("usage", exc, EXIT_CODES["usage"])


if __name__ == "__main__":
    sys.exit(main())
