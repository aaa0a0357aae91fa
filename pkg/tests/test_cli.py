import csv
import json
import subprocess
import sys

import pytest

from kricci.cli import ConfigError, expand_grid, main, validate

DIRICHLET = {
    "command": "solve",
    "problem": "dirichlet",
    "equation": {"n": 5, "k": 2},
    "domain": {"type": "annulus", "a": 1.5, "b": 3.0},
    "mesh": {"N": 200},
    "solver": {"continuation_steps": 8},
    "initial": {"family": "interior_ball", "s": 6.0},
    "oracle": {"family": "exterior_ball", "s": 1.0},
    "oracle_tol": 1e-3,
    "refinements": 3,
}

BLOWUP = {
    "command": "solve",
    "problem": "blowup",
    "equation": {"n": 3, "k": 1},
    "domain": {"type": "ball", "R": 1.0},
    "mesh": {"N": 2000, "grading": {"type": "clustered", "ends": ["hi"]}},
    "initial": {"family": "interior_ball", "s": 1.5},
    "oracle": {"family": "interior_ball", "s": 1.0},
    "oracle_tol": 1e-4,
    "blowup": {"core": [0.0, 0.9]},
}


def write(tmp_path, cfg, name="cfg.json"):
    path = tmp_path / name
    path.write_text(json.dumps(cfg))
    return str(path)


def run(tmp_path, command, cfg=None, out="out", extra=()):
    argv = [command, "--out", str(tmp_path / out)]
    if cfg is not None:
        argv += ["--config", write(tmp_path, cfg)]
    return main(argv + list(extra))


def test_verify_default(tmp_path, capsys):
    assert run(tmp_path, "verify") == 0
    report = json.loads((tmp_path / "out" / "verify.json").read_text())
    assert report["schema"] == 1 and report["passed"]
    assert "checks passed" in capsys.readouterr().out


def test_verify_negative_control(tmp_path, capsys):
    code = run(tmp_path, "verify", {"suites": ["exact"], "n_max": 3, "c_factor": 1.05})
    assert code == 1
    out = capsys.readouterr().out
    assert "FAIL [exact] interior_ball n=3 k=1: value" in out


def test_verify_barrier_only(tmp_path):
    assert run(tmp_path, "verify", {"suites": ["barriers"], "barrier_dims": [3, 4, 5]}) == 0


def test_unknown_key_rejected(tmp_path, capsys):
    assert run(tmp_path, "verify", {"suites": ["exact"], "bogus": 1}) == 2
    assert "bogus" in capsys.readouterr().err
    with pytest.raises(ConfigError):
        validate(dict(DIRICHLET, extra=True), "solve")


def test_bad_values_rejected(tmp_path):
    assert run(tmp_path, "verify", {"general": [[0.0, -1.0]]}) == 2
    bad = json.loads(json.dumps(DIRICHLET))
    bad["equation"]["k"] = 9
    assert run(tmp_path, "solve", bad) == 2
    assert main(["verify", "--seed", str(2**64), "--out", str(tmp_path / "o")]) == 2


def test_dirichlet_solve_order_table(tmp_path, capsys):
    assert run(tmp_path, "solve", DIRICHLET) == 0
    out = capsys.readouterr().out
    assert "order" in out
    report = json.loads((tmp_path / "out" / "report.json").read_text())
    assert 1.8 <= report["order"]["estimate"] <= 2.2
    with open(tmp_path / "out" / "field.csv") as fh:
        rows = list(csv.reader(fh))
    assert rows[0] == ["r", "dist_lo", "dist_hi", "v", "u", "margin", "residual"]
    assert len(rows) == 800 + 2


def test_blowup_solve_matches_oracle(tmp_path):
    assert run(tmp_path, "solve", BLOWUP) == 0
    report = json.loads((tmp_path / "out" / "report.json").read_text())
    run0 = report["runs"][0]
    assert run0["oracle_error"] <= 1e-4
    assert abs(run0["growth"]["relative_error"]) <= 0.02
    assert all(c["monotone"] for c in run0["report"]["monotonicity_certificates"])


def test_maximal_solve_reports_certificate(tmp_path):
    cfg = {
        "command": "solve",
        "problem": "maximal",
        "equation": {"n": 3, "k": 1},
        "oracle": {"family": "exterior_ball", "s": 1.0},
        "maximal": {"s": 1.0, "radii": [8.0, 16.0], "N": 800},
    }
    code = run(tmp_path, "solve", cfg)
    report = json.loads((tmp_path / "out" / "report.json").read_text())
    certs = report["runs"][0]["report"]["monotonicity_certificates"]
    assert certs and "monotone_decrease" in certs[0]
    assert code == (0 if all(c["monotone_decrease"] for c in certs) else 1)
    assert (tmp_path / "out" / "core.csv").exists() and (tmp_path / "out" / "field_R16.csv").exists()
    assert max(report["oracle_error"]) <= 1e-3


def test_classify_table(tmp_path, capsys):
    assert run(tmp_path, "classify", {"n": [3, 10], "k": [1, 1]}) == 0
    out = capsys.readouterr().out
    with open(tmp_path / "out" / "classify.csv") as fh:
        rows = list(csv.DictReader(fh))
    for n in range(3, 11):
        verdicts = [r["verdict"] for r in rows if int(r["n"]) == n]
        first_bad = next(i + 1 for i, v in enumerate(verdicts) if v != "Regular")
        assert first_bad == -(-(n + 2) // 2)
    assert "Borderline  OPEN" in out
    assert all((r["open"] == "true") == (r["verdict"] == "Borderline") for r in rows)


def test_classify_named_cases(tmp_path):
    assert run(tmp_path, "classify", {"n": [5, 5], "m": [2, 2], "k": [2, 2]}, out="a") == 0
    assert "Regular" in (tmp_path / "a" / "classify.csv").read_text()
    assert run(tmp_path, "classify", {"n": [4, 4], "m": [3, 3], "k": [2, 2]}, out="b") == 0
    assert "NotRegular" in (tmp_path / "b" / "classify.csv").read_text()


def test_outputs_are_byte_identical(tmp_path):
    cfg = dict(DIRICHLET, refinements=1)
    assert run(tmp_path, "solve", cfg, out="one") == 0
    assert run(tmp_path, "solve", cfg, out="two") == 0
    for name in ("report.json", "field.csv"):
        assert (tmp_path / "one" / name).read_bytes() == (tmp_path / "two" / name).read_bytes()
    assert run(tmp_path, "verify", None, out="v1") == 0
    assert run(tmp_path, "verify", None, out="v2") == 0
    assert (tmp_path / "v1" / "verify.json").read_bytes() == (tmp_path / "v2" / "verify.json").read_bytes()


def test_sweep(tmp_path):
    base = {k: v for k, v in DIRICHLET.items() if k not in ("command", "refinements")}
    cfg = {"command": "sweep", "base": base, "grid": {"equation.k": [1, 2], "mesh.N": [100, 200]}}
    assert len(expand_grid(cfg)) == 4
    assert run(tmp_path, "sweep", cfg, out="s1", extra=["--jobs", "2"]) == 0
    assert run(tmp_path, "sweep", cfg, out="s2", extra=["--jobs", "1"]) == 0
    a = (tmp_path / "s1" / "sweep.csv").read_text()
    assert a == (tmp_path / "s2" / "sweep.csv").read_text()
    rows = list(csv.DictReader(a.splitlines()))
    assert len(rows) == 4 and all(r["passed"] == "true" for r in rows)
    for r in rows:
        assert (tmp_path / "s1" / r["config_hash"] / "report.json").exists()


def test_sweep_reports_failing_point(tmp_path):
    base = {k: v for k, v in DIRICHLET.items() if k not in ("command", "refinements")}
    cfg = {"command": "sweep", "base": base, "grid": {"equation.k": [2, 7]}}
    assert run(tmp_path, "sweep", cfg, extra=["--jobs", "1"]) == 1
    rows = list(csv.DictReader((tmp_path / "out" / "sweep.csv").read_text().splitlines()))
    assert sorted(r["passed"] for r in rows) == ["false", "true"]


def test_console_entry_point(tmp_path):
    proc = subprocess.run(
        [sys.executable, "-m", "kricci.cli", "classify", "--out", str(tmp_path), "--config", write(tmp_path, {"n": [4, 4]})],
        capture_output=True, text=True, check=False,
    )
    assert proc.returncode == 0 and "OPEN" in proc.stdout
