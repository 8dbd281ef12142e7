import csv
import json

import numpy as np
import pytest

from randpgd import __version__
from randpgd.certify import validate_report
from randpgd.cli import OUTPUT_ENV, main
from randpgd.pgd import load_tensor
from randpgd.sketch import table1

SMALL = ["--nx", "8", "--ny", "2", "--count", "40"]


@pytest.fixture
def out(tmp_path, monkeypatch):
    monkeypatch.setenv(OUTPUT_ENV, str(tmp_path))
    return tmp_path


def run(capsys, *argv):
    code = main(list(argv))
    cap = capsys.readouterr()
    return code, cap.out, cap.err


def read_csv(path):
    lines = [line for line in path.read_text().splitlines() if not line.startswith("#")]
    return list(csv.DictReader(lines))


def header(path):
    return [line[2:] for line in path.read_text().splitlines() if line.startswith("# ")]


def test_solve_writes_tensor_and_history(out, capsys):
    code, stdout, _ = run(capsys, "solve", "--problem", "harmonic", "--rank", "10", "--seed", "7", *SMALL)
    assert code == 0
    assert json.loads(stdout)["status"] == "ok"
    t = load_tensor(out / "solve" / "tensor.pgdt")
    assert t.rank == 10
    rows = read_csv(out / "solve" / "history.csv")
    assert [int(r["rank"]) for r in rows] == list(range(11))


def test_solve_is_byte_deterministic(tmp_path, capsys):
    for name in ("a", "b"):
        assert main(["--output-root", str(tmp_path / name), "solve", "--rank", "4", "--seed", "3", *SMALL]) == 0
    capsys.readouterr()
    for f in ("history.csv", "tensor.pgdt", "tensor.pgdt.json"):
        assert (tmp_path / "a" / "solve" / f).read_bytes() == (tmp_path / "b" / "solve" / f).read_bytes()


def test_solve_rank_zero(out, capsys):
    assert run(capsys, "solve", "--rank", "0", *SMALL)[0] == 0
    assert load_tensor(out / "solve" / "tensor.pgdt").rank == 0
    assert len(read_csv(out / "solve" / "history.csv")) == 1


def test_provenance_header(out, capsys):
    run(capsys, "solve", "--rank", "2", "--seed", "5", *SMALL)
    lines = header(out / "solve" / "history.csv")
    assert lines[0] == f"randpgd {__version__}"
    keys = dict(line.split(": ", 1) for line in lines[1:])
    assert keys["seed"] == "5"
    assert len(keys["config_sha256"]) == 64
    meta = json.loads((out / "solve" / "tensor.pgdt.json").read_text())
    assert meta["provenance"]["config_sha256"] == keys["config_sha256"]


def test_output_root_precedence(tmp_path, monkeypatch, capsys):
    monkeypatch.setenv(OUTPUT_ENV, str(tmp_path / "env"))
    assert main(["solve", "--rank", "1", *SMALL]) == 0
    assert (tmp_path / "env" / "solve" / "history.csv").exists()
    assert main(["--output-root", str(tmp_path / "flag"), "solve", "--rank", "1", *SMALL]) == 0
    assert (tmp_path / "flag" / "solve" / "history.csv").exists()


def test_config_file_and_unknown_key(out, tmp_path, capsys):
    cfg = tmp_path / "run.ini"
    cfg.write_text("[pgd]\nrank = 3\n[problem]\nnx = 8\nny = 2\ncount = 40\n")
    assert run(capsys, "--config", str(cfg), "solve")[0] == 0
    assert load_tensor(out / "solve" / "tensor.pgdt").rank == 3
    cfg.write_text("[pgd]\nrnak = 3\n")
    code, _, err = run(capsys, "--config", str(cfg), "solve")
    assert code == 2 and json.loads(err)["error"] == "usage"
    cfg.write_text("[run]\nmode = parallel\n")
    assert run(capsys, "--config", str(cfg), "solve", *SMALL)[0] == 2


def test_certify_report(out, capsys):
    code, _, _ = run(capsys, "certify", "--tol", "1e-1", "--alpha", "2", "--k-lag", "6",
                     "--m-max", "8", "--seed", "0", "--baselines", "--truth", *SMALL)
    assert code == 0
    data = json.loads((out / "certify" / "report.json").read_text())
    validate_report({k: v for k, v in data.items() if k != "provenance"})
    assert data["final"]["estimate"] <= 0.1 or data["final"]["m"] == 8
    rows = read_csv(out / "certify" / "per_mu.csv")
    assert len(rows) == 40


def test_certify_single_iteration(out, capsys):
    assert run(capsys, "certify", "--m-max", "1", "--tol", "1e-9", *SMALL)[0] == 0
    data = json.loads((out / "certify" / "report.json").read_text())
    assert data["final"]["m"] == 1 and len(data["history"]) == 1


def test_certify_bad_w_is_usage_error(out, capsys):
    code, _, err = run(capsys, "certify", "--w", "2.5", *SMALL)
    assert code == 2
    assert json.loads(err)["exit_code"] == 2


def test_certify_rank_cap_exit_code(out, capsys):
    code, _, err = run(capsys, "certify", "--tol", "1e-12", "--m-max", "6", "--k-lag", "1",
                       "--alpha", "1.0001", "--l-max", "1", "--K", "4", *SMALL)
    assert code == 3
    msg = json.loads(err)
    assert msg["error"] == "dual_rank_cap"
    assert (out / "certify" / "report.json").exists()


def test_estimate_command(out, capsys):
    run(capsys, "solve", "--rank", "3", *SMALL)
    code, _, _ = run(capsys, "estimate", "--tensor", str(out / "solve" / "tensor.pgdt"),
                     "--K", "4", "--L", "3", "--truth", *SMALL)
    assert code == 0
    summary = json.loads((out / "estimate" / "summary.json").read_text())
    assert summary["fast"]["k"] == 4 and summary["tensor_rank"] == 3
    assert "provenance" in summary
    assert len(read_csv(out / "estimate" / "per_mu.csv")) == 40


def test_bench_table1(out, capsys):
    assert run(capsys, "bench", "table1")[0] == 0
    rows = read_csv(out / "bench-table1" / "table1.csv")
    assert len(rows) == 24
    want = table1()
    assert [int(r["K"]) for r in rows] == [k for *_, k in want]


def test_bench_option_checks(out, capsys):
    assert run(capsys, "bench", "fig3", "--reps", "3")[0] == 2
    assert run(capsys, "bench", "fig4", "--seeds", "3")[0] == 2
    assert run(capsys, "bench", "nope")[0] == 2


def test_unknown_problem(out, capsys):
    code, _, err = run(capsys, "solve", "--problem", "wrench")
    assert code == 2


def test_export_problem_and_tensor(out, capsys):
    assert run(capsys, "export", "problem", *SMALL)[0] == 0
    manifest = out / "export-problem" / "problem.json"
    assert manifest.exists()
    assert run(capsys, "solve", "--problem", str(manifest), "--rank", "2")[0] == 0
    assert run(capsys, "export", "tensor", str(out / "solve" / "tensor.pgdt"))[0] == 0
    spatial = read_csv(out / "export-tensor" / "spatial.csv")
    assert list(spatial[0]) == ["row", "m0_k0", "m1_k0"]
    t = load_tensor(out / "solve" / "tensor.pgdt")
    col = np.array([float(r["m1_k0"]) for r in spatial])
    np.testing.assert_array_equal(col, t.spatial[1, :, 0])


def test_version(capsys):
    assert main(["--version"]) == 0
    assert __version__ in capsys.readouterr().out
