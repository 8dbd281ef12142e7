"""File-based affine problems: Matrix Market terms, per-axis CSV tables, JSON manifest.

Manifest layout (all paths relative to the manifest)::

    {
      "format": "randpgd-problem", "version": 1, "n": 1470, "spd": false,
      "operator": [{"name": "A0", "matrix": "A0.mtx"}, ...],
      "rhs": [{"name": "f0", "vector": "f0.txt"}, ...],
      "axes": [{"file": "axis0.csv", "range": [0.5, 1.2]}, ...],
      "gram": "gram.mtx"
    }

Each axis CSV has a ``value`` column with the grid points followed by one
column per operator and right-hand-side term.
"""

from __future__ import annotations

import csv
import json
from pathlib import Path

import numpy as np

from ..grid import ParameterGrid
from ..linalg import (
    AffineOperator,
    AffineRHS,
    GramPair,
    as_sparse,
    is_symmetric,
    read_mtx,
    read_vector,
    write_mtx,
    write_vector,
)

__all__ = ["load_external", "export_problem", "ProblemFormatError"]

FORMAT = "randpgd-problem"


class ProblemFormatError(ValueError):
    """Inconsistent or incomplete problem files."""


def _read_axis(path):
    with open(path, newline="") as fh:
        rows = list(csv.reader(fh))
    if not rows:
        raise ProblemFormatError(f"{path}: empty coefficient table")
    header = [h.strip() for h in rows[0]]
    body = np.array([[float(x) for x in r] for r in rows[1:] if r], dtype=float)
    if body.ndim != 2 or body.shape[0] == 0 or body.shape[1] != len(header):
        raise ProblemFormatError(f"{path}: ragged or empty coefficient table")
    return {h: body[:, j] for j, h in enumerate(header)}


def load_external(manifest):
    """Problem from a JSON manifest; returns ``(AffineOperator, GramPair)``."""
    manifest = Path(manifest)
    root = manifest.parent
    try:
        spec = json.loads(manifest.read_text())
    except json.JSONDecodeError as exc:
        raise ProblemFormatError(f"{manifest}: invalid JSON ({exc})")
    if spec.get("format") != FORMAT:
        raise ProblemFormatError(f"{manifest}: not a {FORMAT} manifest")
    for key in ("operator", "rhs", "axes", "gram"):
        if key not in spec:
            raise ProblemFormatError(f"{manifest}: missing '{key}' entry")

    op_terms = spec["operator"]
    rhs_terms = spec["rhs"]
    mats = [read_mtx(root / t["matrix"]) for t in op_terms]
    vecs = [read_vector(root / t["vector"]) for t in rhs_terms]
    n = int(spec.get("n", mats[0].shape[0]))
    for t, m in zip(op_terms, mats):
        if m.shape != (n, n):
            raise ProblemFormatError(f"term {t['name']}: shape {m.shape}, expected {(n, n)}")
    for t, v in zip(rhs_terms, vecs):
        if v.shape != (n,):
            raise ProblemFormatError(f"rhs term {t['name']}: length {v.size}, expected {n}")

    axes, ranges, tables = [], [], []
    for i, ax in enumerate(spec["axes"]):
        table = _read_axis(root / ax["file"])
        if "value" not in table:
            raise ProblemFormatError(f"axis {i} ({ax['file']}): missing 'value' column")
        axes.append(table["value"])
        values = table["value"]
        ranges.append(tuple(ax.get("range", (values[0], values[-1]))))
        tables.append(table)
    grid = ParameterGrid(axes, ranges)

    def coefficient_rows(terms):
        rows = []
        for t in terms:
            row = []
            for i, table in enumerate(tables):
                if t["name"] not in table:
                    raise ProblemFormatError(
                        f"axis {i} ({spec['axes'][i]['file']}): missing coefficient column "
                        f"'{t['name']}'"
                    )
                col = table[t["name"]]
                row.append(None if np.all(col == 1.0) else col)
            rows.append(row)
        return rows

    rhs = AffineRHS(vecs, coefficient_rows(rhs_terms), grid)
    op = AffineOperator(mats, coefficient_rows(op_terms), grid, rhs=rhs, spd=bool(spec.get("spd")))
    gram = read_mtx(root / spec["gram"])
    if gram.shape != (n, n):
        raise ProblemFormatError(f"Gram matrix shape {gram.shape}, expected {(n, n)}")
    try:
        gp = GramPair(gram)
    except ValueError as exc:
        raise ProblemFormatError(f"declared Gram matrix rejected: {exc}")
    return op, gp


def export_problem(op, gram, directory, name="problem.json"):
    """Write ``op`` (with its right-hand side) and ``gram`` as a manifest bundle.

    Callable coefficients are tabulated on the grid.  Returns the manifest path.
    """
    if op.rhs is None:
        raise ValueError("operator carries no right-hand side")
    out = Path(directory)
    out.mkdir(parents=True, exist_ok=True)
    op_terms = []
    for q, m in enumerate(op.matrices):
        fname = f"A{q}.mtx"
        write_mtx(out / fname, m, symmetric=is_symmetric(m, rtol=0.0))
        op_terms.append({"name": f"A{q}", "matrix": fname})
    rhs_terms = []
    for s, b in enumerate(op.rhs.blocks):
        if b.shape[1] != 1:
            raise ValueError("only vector right-hand sides can be exported")
        fname = f"f{s}.txt"
        write_vector(out / fname, b[:, 0])
        rhs_terms.append({"name": f"f{s}", "vector": fname})
    axes = []
    for i, values in enumerate(op.grid.axes):
        fname = f"axis{i}.csv"
        cols = [("value", values)]
        cols += [(f"A{q}", op.tables[q][i]) for q in range(op.n_terms)]
        cols += [(f"f{s}", op.rhs.tables[s][i]) for s in range(op.rhs.n_terms)]
        with open(out / fname, "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow([c[0] for c in cols])
            for j in range(values.size):
                w.writerow([repr(float(c[1][j])) for c in cols])
        axes.append({"file": fname, "range": list(op.grid.ranges[i])})
    write_mtx(out / "gram.mtx", as_sparse(gram.r_x), symmetric=True)
    manifest = {
        "format": FORMAT,
        "version": 1,
        "n": op.n,
        "spd": op.spd,
        "operator": op_terms,
        "rhs": rhs_terms,
        "axes": axes,
        "gram": "gram.mtx",
    }
    path = out / name
    path.write_text(json.dumps(manifest, indent=2) + "\n")
    return path
