"""Boundary regularity by codimension, and growth-rate extraction from solves."""

from __future__ import annotations

from dataclasses import dataclass
from math import comb

import numpy as np

from .symfun import CONE_BOUNDARY_TOL, DomainError, vm_vector

REGULAR = "Regular"
BORDERLINE = "Borderline"
NOT_REGULAR = "NotRegular"

#: Marker printed next to borderline verdicts, whose regularity is unresolved.
OPEN_MARKER = "OPEN"


def vm_sigmas_exact(n: int, m: int, k: int) -> list:
    """sigma_1..sigma_k of v_m as exact integers (two-block binomial convolution)."""
    tb = vm_vector(n, m)
    a, b = int(tb.a), int(tb.b)
    out = []
    for order in range(1, k + 1):
        total = 0
        for j in range(0, min(order, tb.mult_a) + 1):
            rest = order - j
            if rest <= tb.mult_b:
                total += comb(tb.mult_a, j) * comb(tb.mult_b, rest) * a**j * b**rest
        out.append(total)
    return out


@dataclass(frozen=True)
class RegularityVerdict:
    n: int
    m: int
    k: int
    vm_sigma: tuple
    margin: float
    verdict: str

    @property
    def is_open(self) -> bool:
        return self.verdict == BORDERLINE

    def label(self) -> str:
        return f"{self.verdict} ({OPEN_MARKER})" if self.is_open else self.verdict

    def to_dict(self):
        return {"n": self.n, "m": self.m, "k": self.k, "vm_sigma": list(self.vm_sigma), "margin": self.margin, "verdict": self.verdict, "open": self.is_open}


def classify(n: int, m: int, k: int, tol: float = CONE_BOUNDARY_TOL) -> RegularityVerdict:
    """Cone position of v_m: inside Gamma_k, on its boundary, or outside its closure."""
    if n < 3:
        raise DomainError("dimension must be at least 3")
    if not (1 <= m <= n) or not (1 <= k <= n):
        raise DomainError(f"need 1 <= m, k <= n, got m={m}, k={k}")
    sig = vm_sigmas_exact(n, m, k)
    margin = min(s / comb(n, j) for j, s in enumerate(sig, start=1))
    if margin > tol:
        verdict = REGULAR
    elif margin >= -tol:
        verdict = BORDERLINE
    else:
        verdict = NOT_REGULAR
    return RegularityVerdict(n, m, k, tuple(sig), float(margin), verdict)


def verdict_table(n_values, m_values=None, k_values=None) -> list:
    """Verdicts over a grid; ``m_values``/``k_values`` default to 1..n for each n."""
    rows = []
    for n in n_values:
        ms = [m for m in (m_values or range(1, n + 1)) if 1 <= m <= n]
        ks = [k for k in (k_values or range(1, n + 1)) if 1 <= k <= n]
        for m in ms:
            for k in ks:
                rows.append(classify(n, m, k))
    return rows


def growth_coefficient(n: int, k: int) -> float:
    """Limit of rho^{n/2-1} u at a smooth blow-up boundary: ((n-1) C(n,k)^{1/k})^{(n-2)/4}."""
    if n < 3 or not (1 <= k <= n):
        raise DomainError(f"invalid (n, k) = ({n}, {k})")
    return ((n - 1) * comb(n, k) ** (1.0 / k)) ** ((n - 2) / 4.0)


class GrowthFitError(ValueError):
    """The field does not support a boundary growth fit."""


@dataclass(frozen=True)
class GrowthFit:
    estimate: float
    slope: float
    residual: float
    window: tuple
    nodes: int


def default_window(mesh, end: str = "hi") -> tuple:
    """[2h, 20h], with h the coarsest spacing inside the 5% collar of ``end``."""
    lo, hi = mesh.domain.bounds
    d = mesh.end_distance(end)
    left = d[:-1] if end == "hi" else d[1:]
    near = left <= 0.05 * (hi - lo)
    h = float(np.max(mesh.h[near])) if np.any(near) else float(np.min(mesh.h))
    return 2.0 * h, 20.0 * h


def fit_growth(field, n: int, end: str = "hi", window: tuple | None = None, min_nodes: int = 8, mesh=None) -> GrowthFit:
    """Fit rho^{n/2-1} u = a + b rho on a distance window and return a.

    ``field`` is a RadialField, or a closed-form profile sampled on ``mesh``
    (with exact end distances).  ``residual`` is the largest deviation of the
    fit relative to ``a``.  A field without the rho^{1-n/2} divergence
    (log-log slope of u further than 1/4 from 1 - n/2) is rejected.
    """
    mesh = field.mesh if mesh is None else mesh
    if end == "lo" and mesh.has_center:
        raise DomainError("a ball centre is not a boundary end")
    rho = mesh.end_distance(end)
    lo_w, hi_w = window if window is not None else default_window(mesh, end)
    sel = (rho >= lo_w) & (rho <= hi_w) & (rho > 0)
    if hasattr(field, "v"):
        sel &= np.isfinite(field.v)
        v = field.v[sel]
    else:
        v = field.v_jet(mesh.r[sel], rho[sel])[0]
    count = int(np.count_nonzero(sel))
    if count < min_nodes:
        raise GrowthFitError(f"window [{lo_w:.3g}, {hi_w:.3g}] holds {count} nodes, need {min_nodes}")
    x = rho[sel]
    log_u = 0.5 * (n - 2) * v
    slope = float(np.polyfit(np.log(x), log_u, 1)[0])
    if abs(slope - (1.0 - 0.5 * n)) > 0.25:
        raise GrowthFitError(f"no boundary divergence: log-log slope {slope:.3f}, expected {1.0 - 0.5 * n:g}")
    y = np.exp(log_u + (0.5 * n - 1.0) * np.log(x))
    b, a = np.polyfit(x, y, 1)
    resid = float(np.max(np.abs(a + b * x - y)) / abs(a))
    return GrowthFit(float(a), slope, resid, (float(lo_w), float(hi_w)), count)
