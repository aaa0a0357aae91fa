"""Command-line front end: ``kricci verify | solve | classify | sweep``.

Every command reads an optional JSON config (validated against the bundled
schema, unknown keys rejected), writes CSV/JSON files under ``--out`` and
exits 0 exactly when every certificate of the run passed.
"""

from __future__ import annotations

import argparse
import copy
import itertools
import json
import os
import sys
from concurrent.futures import ProcessPoolExecutor
from importlib import resources
from pathlib import Path

import jsonschema
import numpy as np

from . import io as kio
from .conformal import EquationSpec
from .mesh import build_mesh, domain_from_dict, grading_from_dict
from .profiles import exterior_ball, general_radial, interior_ball
from .regularity import OPEN_MARKER, fit_growth, growth_coefficient, verdict_table
from .solver import (
    RadialField,
    SolverConfig,
    estimate_order,
    oracle_error,
    solve_blowup,
    solve_dirichlet,
    solve_maximal,
)
from .symfun import DomainError
from .verify import run_verify


class ConfigError(ValueError):
    pass


def load_schema(command: str) -> dict:
    return json.loads(resources.files("kricci").joinpath("schemas", f"{command}.json").read_text())


def validate(config: dict, command: str) -> dict:
    try:
        jsonschema.validate(config, load_schema(command))
    except jsonschema.ValidationError as exc:
        where = "/".join(str(p) for p in exc.absolute_path) or "<root>"
        raise ConfigError(f"invalid {command} config at {where}: {exc.message}") from None
    return config


def load_config(path, command: str) -> dict:
    config = {} if path is None else json.loads(Path(path).read_text())
    if not isinstance(config, dict):
        raise ConfigError("a config must be a JSON object")
    return validate(config, command)


# ---------------------------------------------------------------------------
# verify


def cmd_verify(config: dict, out: Path, seed: int = 0) -> int:
    cfg = {k: v for k, v in config.items() if k != "command"}
    passed, checks = run_verify(cfg, seed)
    failed = [c for c in checks if not c.passed]
    kio.write_json(out / "verify.json", {"command": "verify", "config": cfg, "seed": seed, "passed": passed, "checks": [c.to_dict() for c in checks]})
    print(f"verify: {len(checks) - len(failed)}/{len(checks)} checks passed")
    for c in failed:
        print(f"FAIL [{c.suite}] {c.name}: value {c.value:.6e} vs threshold {c.threshold:.3e} {c.detail}".rstrip())
    return 0 if passed else 1


# ---------------------------------------------------------------------------
# solve


def equation_from(cfg: dict) -> EquationSpec:
    eq = cfg["equation"]
    if "alpha0" in eq:
        return EquationSpec(eq["n"], eq["k"], eq.get("alpha", 0.0), eq["alpha0"])
    if "alpha" in eq:
        raise ConfigError("alpha needs alpha0")
    return EquationSpec(eq["n"], eq["k"])


def profile_from(d: dict, spec: EquationSpec):
    fam, s = d["family"], d["s"]
    if fam == "interior_ball":
        return interior_ball(spec.n, spec.k, s)
    if fam == "exterior_ball":
        return exterior_ball(spec.n, spec.k, s)
    if spec.mode != "general":
        raise ConfigError(f"{fam} needs alpha and alpha0 in the equation")
    side = "interior" if fam == "general_interior" else "exterior"
    return general_radial(spec.n, spec.k, float(spec.alpha), float(spec.alpha0), s, kind=side)


def _mesh_from(cfg: dict, N: int):
    grading = grading_from_dict(cfg["mesh"].get("grading", {"type": "uniform"}))
    return build_mesh(domain_from_dict(cfg["domain"]), N, grading)


def _require(cfg, *keys):
    for key in keys:
        if key not in cfg:
            raise ConfigError(f"{cfg['problem']} problem needs '{key}'")


def run_solve(cfg: dict, out: Path) -> dict:
    """Execute one solve config, write its files under ``out`` and return the summary."""
    spec = equation_from(cfg)
    solver = SolverConfig(**cfg.get("solver", {}))
    oracle = profile_from(cfg["oracle"], spec) if "oracle" in cfg else None
    n = spec.n
    summary = {"command": "solve", "config": cfg, "config_hash": kio.config_hash(cfg), "runs": [], "passed": True}
    problem = cfg["problem"]
    if problem == "maximal":
        _require(cfg, "maximal")
        mx = cfg["maximal"]
        res = solve_maximal(
            mx["s"], spec, solver,
            radii=tuple(mx.get("radii", (8.0, 16.0, 32.0, 64.0))), N=mx.get("N", 3000),
            core=tuple(mx.get("core", (1.1, 5.0))), outer=mx.get("outer", "closed_form"),
            monotone_tol=mx.get("monotone_tol", 1e-10),
        )
        cols = ["r"] + [f"u_R{R:g}" for R in res.radii] + ["u_extrapolated"]
        rows = [[res.core_r[i]] + [cu[i] for cu in res.core_u] + [res.extrapolated[i] if len(res.extrapolated) else ""] for i in range(len(res.core_r))]
        if oracle is not None:
            cols.append("u_oracle")
            ex = oracle(res.core_r)
            for i, row in enumerate(rows):
                row.append(ex[i])
            summary["oracle_error"] = [float(np.max(np.abs(cu / ex - 1.0))) for cu in res.core_u]
        kio.write_rows(out / "core.csv", cols, rows)
        for R, f in zip(res.radii, res.fields):
            kio.write_field_csv(out / f"field_R{R:g}.csv", f, spec)
        summary["runs"].append({"report": res.report.to_dict(), "radii": res.radii})
        summary["cauchy_gap"] = res.cauchy_gap
        summary["decay_exponent"] = res.decay_exponent
        monotone = all(c["monotone_decrease"] for c in res.report.monotonicity_certificates)
        summary["passed"] = bool(res.report.converged and monotone)
        if oracle is not None and "oracle_tol" in cfg:
            summary["passed"] &= summary["oracle_error"][-1] <= cfg["oracle_tol"]
        print("R        converged  oracle_error")
        for j, R in enumerate(res.radii):
            err = summary.get("oracle_error", [float("nan")] * len(res.radii))[j]
            print(f"{R:<8g} {'yes':<10} {err:.3e}")
        return summary

    _require(cfg, "domain", "mesh", "initial")
    levels = cfg.get("refinements", 1)
    fields = []
    initial = profile_from(cfg["initial"], spec)
    for i in range(levels):
        N = cfg["mesh"]["N"] * 2**i
        mesh = _mesh_from(cfg, N)
        run = {"N": N}
        if problem == "dirichlet":
            boundary = dict(cfg.get("boundary", {}))
            if oracle is not None:
                ref = RadialField.from_profile(mesh, oracle)
                boundary.setdefault("hi", float(ref.v[-1]))
                if not mesh.has_center:
                    boundary.setdefault("lo", float(ref.v[0]))
            field, rep = solve_dirichlet(mesh, boundary, spec, solver, RadialField.from_profile(mesh, initial))
        else:
            bl = cfg.get("blowup", {})
            core = tuple(bl["core"]) if "core" in bl else None
            field, rep = solve_blowup(
                mesh, spec, solver, initial, ends=tuple(bl.get("ends", ("hi",))), core=core,
                monotone_tol=bl.get("monotone_tol", 1e-10), m_final=bl.get("m_final"),
            )
            run["core"] = core
        run["report"] = rep.to_dict()
        run["iterations"] = rep.iterations
        run["converged"] = rep.converged
        if oracle is not None:
            run["oracle_error"] = oracle_error(field, oracle, n, run.get("core"))
        if problem == "blowup" and spec.mode == "pure" and "hi" in cfg.get("blowup", {}).get("ends", ("hi",)):
            try:
                g = fit_growth(field, n)
                c0 = growth_coefficient(n, spec.k)
                run["growth"] = {"estimate": g.estimate, "expected": c0, "relative_error": g.estimate / c0 - 1.0, "window": list(g.window), "nodes": g.nodes}
            except (ValueError, DomainError) as exc:
                run["growth"] = {"error": str(exc)}
        summary["runs"].append(run)
        summary["passed"] &= bool(rep.converged)
        fields.append(field)
        if not rep.converged:
            break
    if oracle is not None and "oracle_tol" in cfg and summary["runs"]:
        # the tolerance targets the finest solve
        summary["passed"] &= summary["runs"][-1]["oracle_error"] <= cfg["oracle_tol"]
    if fields:
        kio.write_field_csv(out / "field.csv", fields[-1], spec)
    if len(fields) >= 3 and (oracle is not None or problem == "dirichlet"):
        est = estimate_order(fields, n, oracle=oracle, core=summary["runs"][-1].get("core"))
        summary["order"] = {"orders": est.orders, "errors": est.errors, "estimate": est.order}
    print("N        iters  converged  oracle_error  order")
    orders = summary.get("order", {}).get("orders", [])
    for i, run in enumerate(summary["runs"]):
        err = run.get("oracle_error", float("nan"))
        order = f"{orders[i - 1]:.3f}" if 1 <= i <= len(orders) else "-"
        print(f"{run['N']:<8d} {run['iterations']:<6d} {str(run['converged']):<10} {err:<13.3e} {order}")
    return summary


def cmd_solve(config: dict, out: Path) -> int:
    cfg = {k: v for k, v in config.items() if k != "command"}
    out.mkdir(parents=True, exist_ok=True)
    try:
        summary = run_solve(cfg, out)
    except (ConfigError, DomainError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    path = kio.write_json(out / "report.json", summary)
    if not summary["passed"]:
        print(f"solve did not pass; report at {path}", file=sys.stderr)
        return 1
    return 0


# ---------------------------------------------------------------------------
# classify


def _range(cfg, key, default):
    lo, hi = cfg.get(key, default)
    return list(range(lo, hi + 1))


def cmd_classify(config: dict, out: Path) -> int:
    ns = _range(config, "n", (3, 10))
    ms = _range(config, "m", None) if "m" in config else None
    ks = _range(config, "k", None) if "k" in config else None
    if min(ns) < 3:
        print("error: n must be at least 3", file=sys.stderr)
        return 2
    rows = verdict_table(ns, ms, ks)
    kio.write_rows(out / "classify.csv", kio.VERDICT_COLUMNS, kio.verdict_rows(rows))
    print("n   m   k   verdict")
    for v in rows:
        flag = f"  {OPEN_MARKER}" if v.is_open else ""
        print(f"{v.n:<3d} {v.m:<3d} {v.k:<3d} {v.verdict}{flag}")
    return 0


# ---------------------------------------------------------------------------
# sweep


def _set_path(cfg: dict, dotted: str, value):
    keys = dotted.split(".")
    node = cfg
    for key in keys[:-1]:
        node = node.setdefault(key, {})
    node[keys[-1]] = value


def expand_grid(config: dict) -> list:
    """One solve config per point of the cartesian product of ``grid``."""
    names = sorted(config["grid"])
    out = []
    for values in itertools.product(*(config["grid"][k] for k in names)):
        cfg = copy.deepcopy(config["base"])
        for name, value in zip(names, values):
            _set_path(cfg, name, value)
        out.append((dict(zip(names, values)), cfg))
    return out


def _sweep_job(args):
    point, cfg, root = args
    key = kio.config_hash(cfg)
    out = Path(root) / key
    out.mkdir(parents=True, exist_ok=True)
    try:
        validate(cfg, "solve")
        summary = run_solve(cfg, out)
        kio.write_json(out / "report.json", summary)
        runs = summary["runs"]
        err = runs[-1].get("oracle_error", "") if runs else ""
        if isinstance(err, list):
            err = err[-1] if err else ""
        return key, point, bool(summary["passed"]), err, ""
    except Exception as exc:  # a failing point is reported, not fatal to the sweep
        kio.write_json(out / "report.json", {"command": "solve", "config": cfg, "passed": False, "error": str(exc)})
        return key, point, False, "", str(exc)


def cmd_sweep(config: dict, out: Path, jobs: int) -> int:
    points = expand_grid(config)
    names = sorted(config["grid"])
    tasks = [(p, c, str(out)) for p, c in points]
    with open(os.devnull, "w") as sink:
        stdout = sys.stdout
        sys.stdout = sink  # per-point tables would interleave
        try:
            if jobs <= 1:
                results = [_sweep_job(t) for t in tasks]
            else:
                with ProcessPoolExecutor(max_workers=jobs) as pool:
                    results = list(pool.map(_sweep_job, tasks))
        finally:
            sys.stdout = stdout
    results.sort(key=lambda r: r[0])
    rows = [[key] + [json.dumps(point[n]) for n in names] + [passed, err, msg] for key, point, passed, err, msg in results]
    kio.write_rows(out / "sweep.csv", ["config_hash"] + names + ["passed", "oracle_error", "error"], rows)
    ok = all(r[2] for r in results)
    print(f"sweep: {sum(r[2] for r in results)}/{len(results)} points passed")
    return 0 if ok else 1


# ---------------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="kricci", description="Radial solver and certificates for conformal k-Ricci blow-up problems.")
    sub = parser.add_subparsers(dest="command", required=True)
    for name, text in (
        ("verify", "exact-solution residuals and barrier certificates"),
        ("solve", "Dirichlet, blow-up or maximal-solution solve"),
        ("classify", "regularity verdicts by codimension"),
        ("sweep", "parameter sweep of solve configs"),
    ):
        p = sub.add_parser(name, help=text)
        p.add_argument("--config", type=Path, default=None, help="JSON config (defaults are used when omitted)")
        p.add_argument("--out", type=Path, default=Path("kricci-out"), help="output directory")
        p.add_argument("--seed", type=int, default=0, help="seed for randomized checks")
        p.add_argument("--jobs", type=int, default=os.cpu_count() or 1, help="worker processes for sweeps")
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    if not (0 <= args.seed < 2**64):
        print("error: --seed must be an unsigned 64-bit integer", file=sys.stderr)
        return 2
    try:
        config = load_config(args.config, args.command)
    except (ConfigError, json.JSONDecodeError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    out = args.out
    out.mkdir(parents=True, exist_ok=True)
    try:
        return _dispatch(args, config, out)
    except (ConfigError, DomainError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


def _dispatch(args, config: dict, out: Path) -> int:
    if args.command == "verify":
        return cmd_verify(config, out, args.seed)
    if args.command == "solve":
        if not config:
            raise ConfigError("solve needs --config")
        return cmd_solve(config, out)
    if args.command == "classify":
        return cmd_classify(config, out)
    if not config:
        raise ConfigError("sweep needs --config")
    return cmd_sweep(config, out, max(1, args.jobs))

if __name__ == "__main__":
    sys.exit(main())
