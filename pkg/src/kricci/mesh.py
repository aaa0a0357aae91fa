"""Radial meshes on balls, annuli and truncated exterior domains.

Clustered meshes are equispaced in a smooth stretched coordinate

    xi(x) = sum over clustered ends of ln(1 + dist_end(x) / rho_scale)  (signed)
            + bulk(x) / S

so every decade of distance to a clustered end receives the same number of
nodes, and refinement by N -> 2N halves every spacing.  Distances to both
ends are stored explicitly: near a blow-up end the radius itself cannot
represent them to full precision.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from math import log

import numpy as np

from .symfun import DomainError

MIN_INTERVALS = 16


@dataclass(frozen=True)
class Ball:
    R: float

    def __post_init__(self):
        if not self.R > 0:
            raise DomainError("ball radius must be positive")

    @property
    def bounds(self):
        return 0.0, float(self.R)

    @property
    def has_center(self) -> bool:
        return True

    def to_dict(self):
        return {"type": "ball", "R": self.R}


@dataclass(frozen=True)
class Annulus:
    a: float
    b: float

    def __post_init__(self):
        if not (0 < self.a < self.b):
            raise DomainError("annulus needs 0 < a < b")

    @property
    def bounds(self):
        return float(self.a), float(self.b)

    @property
    def has_center(self) -> bool:
        return False

    def to_dict(self):
        return {"type": "annulus", "a": self.a, "b": self.b}


@dataclass(frozen=True)
class ExteriorTrunc:
    """Exterior of the ball of radius ``s``, truncated at ``R_out``."""

    s: float
    R_out: float

    def __post_init__(self):
        if not (0 < self.s < self.R_out):
            raise DomainError("exterior domain needs 0 < s < R_out")

    @property
    def bounds(self):
        return float(self.s), float(self.R_out)

    @property
    def has_center(self) -> bool:
        return False

    def to_dict(self):
        return {"type": "exterior", "s": self.s, "R_out": self.R_out}


def domain_from_dict(d: dict):
    kind = d["type"]
    if kind == "ball":
        return Ball(float(d["R"]))
    if kind == "annulus":
        return Annulus(float(d["a"]), float(d["b"]))
    if kind == "exterior":
        return ExteriorTrunc(float(d["s"]), float(d["R_out"]))
    raise DomainError(f"unknown domain type {kind!r}")


@dataclass(frozen=True)
class Uniform:
    """Equal spacing; logarithmic spacing on a truncated exterior domain."""

    def to_dict(self):
        return {"type": "uniform"}


@dataclass(frozen=True)
class BoundaryClustered:
    """Log-stretched clustering toward the named ends (``"lo"``, ``"hi"``).

    ``rho_scale`` is the distance below which spacing stops shrinking
    geometrically; ``bulk_fraction`` is the share of the stretched coordinate
    given to the smooth bulk term.
    """

    ends: tuple = ("lo", "hi")
    rho_scale: float = 1e-9
    bulk_fraction: float = 0.4

    def __post_init__(self):
        object.__setattr__(self, "ends", tuple(self.ends))
        if not self.ends or any(e not in ("lo", "hi") for e in self.ends):
            raise DomainError("clustered ends must be a non-empty subset of ('lo', 'hi')")
        if not self.rho_scale > 0 or not (0 < self.bulk_fraction < 1):
            raise DomainError("need rho_scale > 0 and 0 < bulk_fraction < 1")

    def to_dict(self):
        return {"type": "clustered", "ends": list(self.ends), "rho_scale": self.rho_scale, "bulk_fraction": self.bulk_fraction}


def grading_from_dict(d: dict):
    if d["type"] == "uniform":
        return Uniform()
    if d["type"] == "clustered":
        return BoundaryClustered(tuple(d.get("ends", ("lo", "hi"))), float(d.get("rho_scale", 1e-9)), float(d.get("bulk_fraction", 0.4)))
    raise DomainError(f"unknown grading {d['type']!r}")


@dataclass(frozen=True)
class RadialMesh:
    """Strictly increasing radii with exact spacings and end distances."""

    r: np.ndarray
    h: np.ndarray
    dist_lo: np.ndarray
    dist_hi: np.ndarray
    domain: object
    grading: object = field(default_factory=Uniform)

    @property
    def N(self) -> int:
        return len(self.r) - 1

    @property
    def has_center(self) -> bool:
        return self.domain.has_center

    def end_distance(self, end: str) -> np.ndarray:
        return self.dist_lo if end == "lo" else self.dist_hi

    def fraction_near(self, end: str, frac: float = 0.05) -> float:
        lo, hi = self.domain.bounds
        return float(np.mean(self.end_distance(end) <= frac * (hi - lo)))


def _stretch(domain, grading: BoundaryClustered):
    lo, hi = domain.bounds
    L = hi - lo
    rho0 = grading.rho_scale
    log_bulk = isinstance(domain, ExteriorTrunc) or (lo > 0 and hi / lo > 10.0)
    if log_bulk:
        bulk = lambda x: np.log(x)
        bulk_range = log(hi / lo)
    else:
        bulk = lambda x: x
        bulk_range = L
    end_range = len(grading.ends) * log(1.0 + L / rho0)
    f = grading.bulk_fraction
    S = bulk_range * (1.0 - f) / (f * end_range)

    def xi_from_dist(d_lo, d_hi):
        x = np.where(d_lo <= d_hi, lo + d_lo, hi - d_hi)
        out = bulk(x) / S
        if "lo" in grading.ends:
            out = out + np.log1p(d_lo / rho0)
        if "hi" in grading.ends:
            out = out - np.log1p(d_hi / rho0)
        return out

    return xi_from_dist


def _clustered_nodes(domain, N, grading):
    lo, hi = domain.bounds
    L = hi - lo
    xi_of = _stretch(domain, grading)
    xi_lo = float(xi_of(np.array(0.0), np.array(L)))
    xi_hi = float(xi_of(np.array(L), np.array(0.0)))
    target = np.linspace(xi_lo, xi_hi, N + 1)
    xi_mid = float(xi_of(np.array(0.5 * L), np.array(0.5 * L)))
    near_lo = target <= xi_mid
    # bisection on the distance to the nearest end keeps tiny distances exact
    a = np.zeros(N + 1)
    b = np.full(N + 1, 0.5 * L)
    for _ in range(200):
        d = 0.5 * (a + b)
        xi = np.where(near_lo, xi_of(d, L - d), xi_of(L - d, d))
        too_far = np.where(near_lo, xi > target, xi < target)
        b = np.where(too_far, d, b)
        a = np.where(too_far, a, d)
    d = 0.5 * (a + b)
    d[0] = 0.0
    d[-1] = 0.0
    dist_lo = np.where(near_lo, d, L - d)
    dist_hi = np.where(near_lo, L - d, d)
    return dist_lo, dist_hi


def build_mesh(domain, N: int, grading=None) -> RadialMesh:
    """Mesh with ``N`` intervals (``N + 1`` nodes) on ``domain``."""
    if grading is None:
        grading = Uniform()
    if N < MIN_INTERVALS:
        raise DomainError(f"need at least {MIN_INTERVALS} intervals")
    lo, hi = domain.bounds
    L = hi - lo
    if isinstance(grading, Uniform):
        if isinstance(domain, ExteriorTrunc):
            r = np.geomspace(lo, hi, N + 1)
        else:
            r = lo + L * np.arange(N + 1) / N
        r[0], r[-1] = lo, hi
        dist_lo, dist_hi = r - lo, hi - r
        h = np.diff(r)
    elif isinstance(grading, BoundaryClustered):
        if domain.has_center and "lo" in grading.ends:
            raise DomainError("a ball centre cannot be a clustered end")
        dist_lo, dist_hi = _clustered_nodes(domain, N, grading)
        r = np.where(dist_lo <= dist_hi, lo + dist_lo, hi - dist_hi)
        r[0], r[-1] = lo, hi
        lower = dist_lo[1:] <= dist_hi[1:]
        h = np.where(lower, dist_lo[1:] - dist_lo[:-1], dist_hi[:-1] - dist_hi[1:])
    else:
        raise DomainError(f"unknown grading {grading!r}")
    if np.any(h <= 0):
        raise DomainError("mesh is not strictly increasing; reduce N or raise rho_scale")
    return RadialMesh(r, h, dist_lo, dist_hi, domain, grading)
