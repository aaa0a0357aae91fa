"""Flat-file outputs: CSV fields and tables, versioned JSON reports.

Floats are written with 17 significant digits so files round-trip exactly
and identical runs produce identical bytes.
"""

from __future__ import annotations

import csv
import hashlib
import io
import json
from pathlib import Path

import numpy as np

SCHEMA_VERSION = 1

#: Column order of field dumps.
FIELD_COLUMNS = ("r", "dist_lo", "dist_hi", "v", "u", "margin", "residual")

#: Column order of classification tables.
VERDICT_COLUMNS = ("n", "m", "k", "verdict", "open", "margin", "vm_sigma")


def fmt(x) -> str:
    if isinstance(x, (bool, np.bool_)):
        return "true" if x else "false"
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    if isinstance(x, (float, np.floating)):
        return format(float(x), ".17g")
    return str(x)


def _clean(obj):
    """JSON-ready copy with numpy scalars/arrays converted and non-finite floats as strings."""
    if isinstance(obj, dict):
        return {str(k): _clean(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple, np.ndarray)):
        return [_clean(v) for v in obj]
    if isinstance(obj, (bool, np.bool_)):
        return bool(obj)
    if isinstance(obj, (int, np.integer)):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        x = float(obj)
        return x if np.isfinite(x) else ("nan" if np.isnan(x) else ("inf" if x > 0 else "-inf"))
    return obj


def dumps(obj) -> str:
    return json.dumps(_clean(obj), sort_keys=True, indent=2) + "\n"


def write_json(path, payload: dict) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    body = dict(payload)
    body["schema"] = SCHEMA_VERSION
    path.write_text(dumps(body))
    return path


def write_rows(path, columns, rows) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(columns)
    for row in rows:
        writer.writerow([fmt(x) for x in row])
    path.write_text(buf.getvalue())
    return path


def field_rows(field, spec):
    """Rows of a field dump; margin and residual are blank at boundary nodes."""
    from .solver import assemble

    n = spec.n
    mesh = field.mesh
    asm = assemble(field, spec, jacobian=False)
    margin = np.full(mesh.N + 1, np.nan)
    resid = np.full(mesh.N + 1, np.nan)
    margin[asm.free] = asm.margin
    resid[asm.free] = asm.residual
    u = field.u(n)
    for i in range(mesh.N + 1):
        yield (
            mesh.r[i], mesh.dist_lo[i], mesh.dist_hi[i], field.v[i], u[i],
            "" if np.isnan(margin[i]) else margin[i],
            "" if np.isnan(resid[i]) else resid[i],
        )


def write_field_csv(path, field, spec) -> Path:
    return write_rows(path, FIELD_COLUMNS, field_rows(field, spec))


def read_field_csv(path) -> dict:
    """Columns of a field dump as float arrays (blank cells become nan)."""
    with open(path, newline="") as fh:
        reader = csv.DictReader(fh)
        rows = list(reader)
    return {c: np.array([float(r[c]) if r[c] != "" else np.nan for r in rows]) for c in FIELD_COLUMNS}


def verdict_rows(verdicts):
    for v in verdicts:
        yield (v.n, v.m, v.k, v.verdict, v.is_open, v.margin, ";".join(str(s) for s in v.vm_sigma))


def config_hash(config: dict) -> str:
    """Stable 16-hex-digit key of a configuration."""
    text = json.dumps(_clean(config), sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(text.encode()).hexdigest()[:16]
