"""Verification suites: exact-solution residuals and barrier certificates.

Each check yields a :class:`Check`; a suite passes when all of its checks do.
"""

from __future__ import annotations

from dataclasses import asdict, dataclass
from math import comb

import numpy as np

from .conformal import EquationSpec, normalized_operator, radial_eigen_arrays
from .profiles import (
    codim_phi,
    collar_subsolution,
    collar_supersolution,
    dirichlet_subsolution,
    exterior_ball,
    general_radial,
    interior_ball,
    phi_limit_spectrum,
    psi_certificate,
    pure_barrier_check,
)
from .symfun import vm_vector

DEFAULTS = {
    "suites": ["exact", "barriers"],
    "n_min": 3,
    "n_max": 8,
    "samples": 200,
    "tol": 1e-9,
    "c_factor": 1.0,
    "general": [[-1.0, 3.0], [0.0, 1.0], [1.0, 2.0]],
    "random_general": 4,
    "barrier_dims": [3, 4, 5],
}


@dataclass(frozen=True)
class Check:
    suite: str
    name: str
    passed: bool
    value: float
    threshold: float
    detail: str = ""

    def to_dict(self):
        out = asdict(self)
        out["value"] = float(self.value)
        out["threshold"] = float(self.threshold)
        return out


def profile_residual(profile, spec: EquationSpec, r) -> np.ndarray:
    """Normalized residual g of a radial profile at radii ``r`` (vectorized two-block path).

    Pure mode gives sigma_k^{1/k}(mu) - 1, general mode the quotient form
    sigma_k/sigma_{k-1} + alpha - alpha0/sigma_{k-1}; both vanish on solutions.
    Points outside the cone give nan.
    """
    n = spec.n
    v, v1, v2 = profile.v_jet(r)
    lam_r, lam_t = radial_eigen_arrays(v, v1, v2, r, n, "V")
    scale = (n - 2) * np.exp(-2.0 * v)
    alpha, alpha0 = spec.coefficients(r) if spec.mode == "general" else (None, None)
    return normalized_operator(scale * lam_r, scale * lam_t, spec, alpha, alpha0)[0]


def _sup(g) -> float:
    g = np.asarray(g, dtype=float)
    return float("inf") if np.any(np.isnan(g)) else float(np.max(np.abs(g)))


def sample_radii(s: float, samples: int, side: str) -> np.ndarray:
    """Interior radii [0, 0.99 s] including the centre; exterior radii geometric on [1.01 s, 100 s]."""
    if side == "interior":
        return np.linspace(0.0, 0.99 * s, samples)
    return np.geomspace(1.01 * s, 100.0 * s, samples)


def exact_suite(cfg: dict, rng: np.random.Generator) -> list:
    checks = []
    tol, samples, factor = cfg["tol"], cfg["samples"], cfg["c_factor"]
    pairs = [tuple(p) for p in cfg["general"]]
    for _ in range(cfg["random_general"]):
        pairs.append((float(rng.uniform(-2.0, 2.0)), float(rng.uniform(0.5, 5.0))))
    for n in range(cfg["n_min"], cfg["n_max"] + 1):
        for k in range(1, n + 1):
            spec = EquationSpec(n, k)
            for side, build in (("interior", interior_ball), ("exterior", exterior_ball)):
                prof = build(n, k, 1.0)
                if factor != 1.0:
                    prof = prof.scaled(factor)
                err = _sup(profile_residual(prof, spec, sample_radii(1.0, samples, side)))
                checks.append(Check("exact", f"{side}_ball n={n} k={k}", err <= tol, err, tol))
            if k < 2:
                continue
            for alpha, alpha0 in pairs:
                gspec = EquationSpec(n, k, alpha, alpha0)
                for side in ("interior", "exterior"):
                    prof = general_radial(n, k, alpha, alpha0, 1.0, kind=side)
                    if factor != 1.0:
                        prof = prof.scaled(factor)
                    err = _sup(profile_residual(prof, gspec, sample_radii(1.0, samples, side)))
                    name = f"general_{side} n={n} k={k} alpha={alpha:.6g} alpha0={alpha0:.6g}"
                    checks.append(Check("exact", name, err <= tol, err, tol))
    return checks


def barrier_suite(cfg: dict, rng: np.random.Generator) -> list:
    checks = []
    for n in cfg["barrier_dims"]:
        for k in range(1, n):
            sub = collar_subsolution(n, k, 1e-3, 1e-3)
            res = pure_barrier_check(sub, k, np.geomspace(1e-5, 1e-3, 100), side="sub")
            checks.append(Check("barriers", f"collar_sub n={n} k={k}", res.holds, res.worst, 0.0, "min of sigma_k^{1/k}(mu) - 1"))
            sup = collar_supersolution(n, k, 1e-3, 1e-3)
            res = pure_barrier_check(sup, k, np.geomspace(1.001e-3, 1.0, 100), side="super")
            checks.append(Check("barriers", f"collar_super n={n} k={k}", res.holds, res.worst, 0.0, "max of sigma_k^{1/k}(mu) - 1 inside the cone"))
    n, m, k, c = 5, 2, 2, 2.0
    lam = np.sort(phi_limit_spectrum(codim_phi(n, k, m, c), 1e-4))
    target = np.sort(0.5 * (n - 2) * c * vm_vector(n, m).expand())
    rel = float(np.max(np.abs(lam - target)) / np.max(np.abs(target)))
    checks.append(Check("barriers", f"codim_phi limit spectrum n={n} m={m} c={c:g}", rel <= 0.01, rel, 0.01))
    cert = psi_certificate(4, 2, 3, 0.1, 10.5)
    checks.append(Check("barriers", "codim_psi certificate n=4 m=3 k=2 a=0.1 b=10.5", cert.holds, cert.worst_margin, 0.0, "largest cone margin over zeta"))
    spec = EquationSpec(4, 2, -1.0, 3.0)
    glued = dirichlet_subsolution(spec, 1.0, 2.0, 0.0, 0.5)
    checks.append(Check("barriers", "glued Dirichlet subsolution n=4 k=2", glued.margin > 0, glued.margin, 0.0, "smallest residual on the grid"))
    return checks


SUITES = {"exact": exact_suite, "barriers": barrier_suite}


def run_verify(config: dict | None = None, seed: int = 0) -> tuple:
    """Run the requested suites; returns (passed, checks)."""
    cfg = dict(DEFAULTS)
    cfg.update(config or {})
    rng = np.random.default_rng(seed)
    checks = []
    for name in cfg["suites"]:
        checks.extend(SUITES[name](cfg, rng))
    return all(c.passed for c in checks), checks


def general_constant_check(n: int, k: int, alpha: float, alpha0: float) -> float:
    """|C(n,k) mu^k + alpha C(n,k-1) mu^{k-1} - alpha0| / alpha0 at the computed root."""
    from .profiles import general_root

    mu = general_root(n, k, alpha, alpha0)
    return abs(comb(n, k) * mu**k + alpha * comb(n, k - 1) * mu ** (k - 1) - alpha0) / alpha0
