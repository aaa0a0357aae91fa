"""Closed-form solutions and barrier functions with analytic jets.

Every profile is stored as its log-jet ``(L, L', L'')`` with ``L = ln u`` in a
single radial-type variable: the distance ``r`` from a centre for ball-type
profiles, or the distance ``rho`` to a boundary piece for collar and
codimension barriers.  Working with ``ln u`` keeps blow-up profiles accurate
all the way to the singular end.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from math import comb, inf, isfinite, log

import numpy as np
from scipy.optimize import brentq

from .conformal import EquationSpec, PointJet, normalized_operator, radial_eigen_arrays
from .symfun import CONE_BOUNDARY_TOL, DomainError, gamma_margin, sigma, sigma_all, vm_vector

KINDS = (
    "InteriorBall",
    "ExteriorBall",
    "UpperBarrier",
    "GeneralRadial",
    "CollarSub",
    "CollarSuper",
    "CodimPhi",
    "CodimPsi",
    "DirichletSub",
    "HarmonicUpper",
)


def growth_constant(n: int, k: int) -> float:
    """((n-1) C(n,k)^{1/k})^{(n-2)/4}: limit of rho^{n/2-1} u at a codimension-one blow-up end."""
    return ((n - 1) * comb(n, k) ** (1.0 / k)) ** ((n - 2) / 4.0)


def ball_constant(n: int, k: int, s: float) -> float:
    return (4.0 * (n - 1) * comb(n, k) ** (1.0 / k) * s * s) ** ((n - 2) / 4.0)


# ---------------------------------------------------------------------------
# log-jets per kind; each returns (L, L', L'') as arrays


def _ball_logjet(p, n, x, dist, exterior):
    s = p["s"]
    if dist is None:
        gap = (x - s) * (x + s) if exterior else (s - x) * (s + x)
    else:
        gap = dist * (2.0 * s + dist) if exterior else dist * (2.0 * s - dist)
    L = log(p["c"]) + (1.0 - 0.5 * n) * np.log(gap)
    sign = -1.0 if exterior else 1.0
    L1 = sign * (n - 2) * x / gap
    L2 = (n - 2) * (s * s + x * x) / gap**2
    return L, L1, L2


def _collar_sub_logjet(p, n, x, dist):
    c0, eps, delta = p["c0"], p["eps"], p["delta"]
    t, q = x + eps, x + delta
    L = log(c0) + (1.0 - 0.5 * n) * np.log(t) + 1.0 / q - 1.0 / delta
    L1 = (1.0 - 0.5 * n) / t - 1.0 / q**2
    L2 = (0.5 * n - 1.0) / t**2 + 2.0 / q**3
    return L, L1, L2


def _collar_super_logjet(p, n, x, dist):
    c0, eps, delta = p["c0"], p["eps"], p["delta"]
    t, q = x - eps, x + delta
    L = log(c0) + (1.0 - 0.5 * n) * np.log(t) + 0.5 * (np.log(q) - log(delta))
    L1 = (1.0 - 0.5 * n) / t + 0.5 / q
    L2 = (0.5 * n - 1.0) / t**2 - 0.5 / q**2
    return L, L1, L2


def _codim_phi_logjet(p, n, x, dist):
    L = log(p["c"]) + (1.0 - 0.5 * n) * np.log(x)
    return L, (1.0 - 0.5 * n) / x, (0.5 * n - 1.0) / x**2


def _psi_zeta(p, x):
    cr = p["c"] * x ** (-p["a"])
    return cr / (cr + p["d"]), cr


def _codim_psi_logjet(p, n, x, dist):
    a, b = p["a"], p["b"]
    zeta, cr = _psi_zeta(p, x)
    L = b * np.log(cr + p["d"])
    L1 = -a * b * zeta / x
    L2 = a * b * zeta * (a * (1.0 - zeta) + 1.0) / x**2
    return L, L1, L2


def _harmonic_logjet(p, n, x, dist):
    A, B = p["A"], p["B"]
    if B == 0.0:
        zero = np.zeros_like(x)
        return np.log(A) + zero, zero, zero
    h = A + B * x ** (2 - n)
    h1 = (2 - n) * B * x ** (1 - n)
    h2 = (2 - n) * (1 - n) * B * x ** (-n)
    return np.log(h), h1 / h, h2 / h - (h1 / h) ** 2


def smoothing_h(t, eps: float):
    """Even C^2 majorant of |t| that equals |t| outside (-eps, eps).

    Returns ``(h, h', h'')``.
    """
    t = np.asarray(t, dtype=float)
    y = t / eps
    inside = np.abs(y) < 1.0
    h = np.where(inside, eps * (0.375 + 0.75 * y**2 - 0.125 * y**4), np.abs(t))
    h1 = np.where(inside, 1.5 * y - 0.5 * y**3, np.sign(t))
    h2 = np.where(inside, (1.5 - 1.5 * y**2) / eps, 0.0)
    return h, h1, h2


def _glued_vjets(p, n, x):
    """v-jets of w, of each end's eta, and of the glued subsolution at radii ``x``."""
    R, C = p["R"], p["C"]
    gap = R * R - x * x
    w = -np.log(gap) - C
    w1 = 2.0 * x / gap
    w2 = 2.0 / gap + 4.0 * x * x / gap**2
    v, v1, v2 = w.copy(), w1.copy(), w2.copy()
    delta, eps = p["delta"], p["eps"]
    ends = []
    if p["a"] > 0:
        ends.append((x - p["a"], 1.0, p["phi_a"]))
    ends.append((p["b"] - x, -1.0, p["phi_b"]))
    for rho, drho, phi in ends:
        near = rho <= delta
        if not np.any(near):
            continue
        q = np.maximum(rho, 0.0) + delta * delta
        eta = 2.0 * log(delta) - np.log(q) + phi
        eta1 = -drho / q
        eta2 = 1.0 / q**2
        t = eta - w
        h, h1, h2 = smoothing_h(t, eps)
        g = 0.5 * (eta + w) + 0.5 * h
        g1 = 0.5 * (eta1 + w1) + 0.5 * h1 * (eta1 - w1)
        g2 = 0.5 * (eta2 + w2) + 0.5 * h1 * (eta2 - w2) + 0.5 * h2 * (eta1 - w1) ** 2
        v = np.where(near, g, v)
        v1 = np.where(near, g1, v1)
        v2 = np.where(near, g2, v2)
    return (w, w1, w2), (v, v1, v2)


def _dirichlet_sub_logjet(p, n, x, dist):
    _, (v, v1, v2) = _glued_vjets(p, n, x)
    f = 0.5 * (n - 2)
    return f * v, f * v1, f * v2


_LOGJETS = {
    "InteriorBall": lambda p, n, x, d: _ball_logjet(p, n, x, d, False),
    "UpperBarrier": lambda p, n, x, d: _ball_logjet(p, n, x, d, False),
    "ExteriorBall": lambda p, n, x, d: _ball_logjet(p, n, x, d, True),
    "GeneralRadial": lambda p, n, x, d: _ball_logjet(p, n, x, d, p["side"] == "exterior"),
    "CollarSub": _collar_sub_logjet,
    "CollarSuper": _collar_super_logjet,
    "CodimPhi": _codim_phi_logjet,
    "CodimPsi": _codim_psi_logjet,
    "DirichletSub": _dirichlet_sub_logjet,
    "HarmonicUpper": _harmonic_logjet,
}


@dataclass(frozen=True)
class RadialProfile:
    """An analytic radial profile u(x) of one scalar variable.

    ``variable`` is ``"r"`` (distance from ``params['x0']``) or ``"rho"``
    (distance to a boundary piece).  ``domain`` is ``(lo, hi, lo_closed, hi_closed)``.
    """

    kind: str
    n: int
    params: dict
    domain: tuple
    variable: str = "r"
    role: str = "solution"
    certified: dict = field(default_factory=dict, compare=False)

    def __post_init__(self):
        if self.kind not in KINDS:
            raise DomainError(f"unknown profile kind {self.kind!r}")

    # -- evaluation ---------------------------------------------------------

    def _check(self, x):
        lo, hi, lo_c, hi_c = self.domain
        bad_lo = x < lo if lo_c else x <= lo
        bad_hi = x > hi if hi_c else x >= hi
        if np.any(bad_lo | bad_hi):
            raise DomainError(f"{self.kind} evaluated outside its domain {self.domain}")

    def log_jet(self, x, dist=None):
        """(ln u, d ln u, d^2 ln u) at ``x``.

        ``dist`` optionally gives the distance to the singular sphere of a
        ball-type profile exactly, avoiding cancellation in ``s - r``.
        """
        x = np.asarray(x, dtype=float)
        self._check(x)
        if dist is not None:
            dist = np.asarray(dist, dtype=float)
        L, L1, L2 = _LOGJETS[self.kind](self.params, self.n, x, dist)
        return np.broadcast_arrays(L, L1, L2)

    def u_jet(self, x, dist=None):
        L, L1, L2 = self.log_jet(x, dist)
        u = np.exp(L)
        return u, u * L1, u * (L2 + L1 * L1)

    def v_jet(self, x, dist=None):
        f = 2.0 / (self.n - 2)
        L, L1, L2 = self.log_jet(x, dist)
        return f * L, f * L1, f * L2

    def __call__(self, x, dist=None):
        return np.exp(self.log_jet(x, dist)[0])

    def point_jet(self, point, tag: str = "U") -> PointJet:
        """Full Euclidean jet of a ball-type profile at ``point``."""
        if self.variable != "r":
            raise DomainError("point_jet needs a centred radial profile")
        from .conformal import radial_jet

        x = np.asarray(point, dtype=float) - np.asarray(self.params.get("x0", np.zeros(self.n)), dtype=float)
        r = float(np.linalg.norm(x))
        prof = self.u_jet(r) if tag == "U" else self.v_jet(r)
        return radial_jet(tuple(float(q) for q in prof), x, tag)

    def scaled(self, c: float) -> "ScaledProfile":
        return ScaledProfile(self, c)

    # -- serialization ------------------------------------------------------

    def to_dict(self) -> dict:
        params = {k: (list(v) if isinstance(v, (tuple, list, np.ndarray)) else v) for k, v in self.params.items()}
        params = {k: ([float(q) for q in v] if isinstance(v, list) else v) for k, v in params.items()}
        lo, hi, lo_c, hi_c = self.domain
        return {
            "kind": self.kind,
            "n": self.n,
            "params": params,
            "domain": [lo if isfinite(lo) else "inf", hi if isfinite(hi) else "inf", lo_c, hi_c],
            "variable": self.variable,
            "role": self.role,
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True)

    @classmethod
    def from_dict(cls, d: dict) -> "RadialProfile":
        lo, hi, lo_c, hi_c = d["domain"]
        lo = inf if lo == "inf" else float(lo)
        hi = inf if hi == "inf" else float(hi)
        params = dict(d["params"])
        if "x0" in params:
            params["x0"] = tuple(params["x0"])
        return cls(d["kind"], int(d["n"]), params, (lo, hi, bool(lo_c), bool(hi_c)), d["variable"], d["role"])

    @classmethod
    def from_json(cls, text: str) -> "RadialProfile":
        return cls.from_dict(json.loads(text))


@dataclass(frozen=True)
class ScaledProfile:
    """``c * base``; only the log-value shifts."""

    base: RadialProfile
    c: float

    @property
    def n(self):
        return self.base.n

    @property
    def variable(self):
        return self.base.variable

    def log_jet(self, x, dist=None):
        L, L1, L2 = self.base.log_jet(x, dist)
        return L + log(self.c), L1, L2

    def u_jet(self, x, dist=None):
        L, L1, L2 = self.log_jet(x, dist)
        u = np.exp(L)
        return u, u * L1, u * (L2 + L1 * L1)

    def v_jet(self, x, dist=None):
        f = 2.0 / (self.n - 2)
        return tuple(f * q for q in self.log_jet(x, dist))

    def __call__(self, x, dist=None):
        return np.exp(self.log_jet(x, dist)[0])


def _center(n, x0):
    x0 = tuple(float(q) for q in (np.zeros(n) if x0 is None else x0))
    if len(x0) != n:
        raise DomainError("centre must have n coordinates")
    return x0


def _check_nk(n, k):
    if n < 3 or not (1 <= k <= n):
        raise DomainError(f"need n >= 3 and 1 <= k <= n, got n={n}, k={k}")


# ---------------------------------------------------------------------------
# exact solutions


def interior_ball(n: int, k: int, s: float, x0=None) -> RadialProfile:
    """Blow-up solution on the ball of radius ``s``."""
    _check_nk(n, k)
    if not s > 0:
        raise DomainError("radius s must be positive")
    p = {"k": k, "s": float(s), "c": ball_constant(n, k, s), "x0": _center(n, x0)}
    return RadialProfile("InteriorBall", n, p, (0.0, float(s), True, False))


def exterior_ball(n: int, k: int, s: float, x0=None) -> RadialProfile:
    """Blow-up solution outside the ball of radius ``s``; decays like |x|^{2-n}."""
    _check_nk(n, k)
    if not s > 0:
        raise DomainError("radius s must be positive")
    p = {"k": k, "s": float(s), "c": ball_constant(n, k, s), "x0": _center(n, x0)}
    return RadialProfile("ExteriorBall", n, p, (float(s), inf, False, False))


def upper_barrier_ball(n: int, k: int, R: float, x0=None) -> RadialProfile:
    """Pointwise upper bound for any positive admissible solution on B_R(x0)."""
    prof = interior_ball(n, k, R, x0)
    return RadialProfile("UpperBarrier", n, prof.params, prof.domain, role="upper_bound")


def center_bound(n: int, k: int, R: float) -> float:
    """Upper bound for u(x0) of any positive admissible solution on B_R(x0)."""
    return (4.0 * (n - 1) * comb(n, k) ** (1.0 / k)) ** ((n - 2) / 4.0) * R ** (1.0 - 0.5 * n)


def root_polynomial(mu, n: int, k: int, alpha: float, alpha0: float):
    return comb(n, k) * mu**k + alpha * comb(n, k - 1) * mu ** (k - 1) - alpha0


def general_root(n: int, k: int, alpha: float, alpha0: float) -> float:
    """Smallest positive root of C(n,k) mu^k + alpha C(n,k-1) mu^{k-1} = alpha0."""
    if k < 2:
        raise DomainError("general mode needs k >= 2")
    if not alpha0 > 0:
        raise DomainError("alpha0 must be positive")
    hi = (alpha0 / comb(n, k)) ** (1.0 / k) + max(0.0, -alpha) * n + 1.0
    while root_polynomial(hi, n, k, alpha, alpha0) <= 0:
        hi *= 2.0
    grid = np.linspace(0.0, hi, 2049)[1:]
    vals = root_polynomial(grid, n, k, alpha, alpha0)
    idx = int(np.argmax(vals > 0))
    lo = 0.0 if idx == 0 else grid[idx - 1]
    root = brentq(root_polynomial, lo, grid[idx], args=(n, k, alpha, alpha0), xtol=1e-300, rtol=4 * np.finfo(float).eps, maxiter=500)
    return float(root)


def general_radial(n: int, k: int, alpha: float, alpha0: float, s: float, x0=None, kind: str = "interior") -> RadialProfile:
    """Radial blow-up solution of sigma_k + alpha sigma_{k-1} = alpha0 with constant coefficients."""
    _check_nk(n, k)
    if kind not in ("interior", "exterior"):
        raise DomainError("kind must be 'interior' or 'exterior'")
    if not s > 0:
        raise DomainError("radius s must be positive")
    mu = general_root(n, k, alpha, alpha0)
    c = (4.0 * (n - 1) / mu) ** ((n - 2) / 4.0) * s ** ((n - 2) / 2.0)
    p = {"k": k, "alpha": float(alpha), "alpha0": float(alpha0), "mu": mu, "s": float(s), "c": c, "x0": _center(n, x0), "side": kind}
    dom = (0.0, float(s), True, False) if kind == "interior" else (float(s), inf, False, False)
    return RadialProfile("GeneralRadial", n, p, dom)


# ---------------------------------------------------------------------------
# collar barriers over the distance rho to a flat boundary


def collar_subsolution(n: int, k: int, eps: float, delta: float, rho0: float = inf) -> RadialProfile:
    """c0 (rho+eps)^{1-n/2} exp(1/(rho+delta) - 1/delta)."""
    _check_nk(n, k)
    if not (eps > 0 and delta > 0):
        raise DomainError("eps and delta must be positive")
    p = {"k": k, "c0": growth_constant(n, k), "eps": float(eps), "delta": float(delta)}
    return RadialProfile("CollarSub", n, p, (0.0, float(rho0), True, False), "rho", "subsolution")


def collar_supersolution(n: int, k: int, eps: float, delta: float, rho1: float = inf) -> RadialProfile:
    """c0 (rho-eps)^{1-n/2} sqrt((delta+rho)/delta), valid for rho > eps."""
    _check_nk(n, k)
    if not (eps > 0 and delta > 0):
        raise DomainError("eps and delta must be positive")
    p = {"k": k, "c0": growth_constant(n, k), "eps": float(eps), "delta": float(delta)}
    return RadialProfile("CollarSuper", n, p, (float(eps), float(rho1), False, False), "rho", "supersolution")


# ---------------------------------------------------------------------------
# codimension-m barriers


def phi_cmax(n: int, k: int, m: int) -> float:
    """(sigma_k^{1/k}(v_m))^{(n-2)/4}, the supremum of admissible constants for c rho^{1-n/2}."""
    s = sigma(vm_vector(n, m).expand(), k)
    if s <= 0:
        raise DomainError("v_m outside Gamma_k")
    return s ** ((n - 2) / (4.0 * k))


def codim_phi(n: int, k: int, m: int, c: float) -> RadialProfile:
    """Subsolution c rho^{1-n/2} near a codimension-m set with v_m in Gamma_k."""
    _check_nk(n, k)
    vm = vm_vector(n, m).expand()
    margin = gamma_margin(vm, k)
    if margin <= 0:
        from .regularity import classify

        raise DomainError(f"v_m not in Gamma_k: {classify(n, m, k).verdict}")
    cmax = phi_cmax(n, k, m)
    if not (0 < c < cmax):
        raise DomainError(f"c={c} outside (0, {cmax})")
    p = {"k": k, "m": m, "c": float(c), "cmax": cmax}
    return RadialProfile("CodimPhi", n, p, (0.0, inf, False, False), "rho", "subsolution")


def psi_structure_blocks(n: int, m: int, a: float, b: float, zeta):
    """Block values of A_m + B_ab(zeta) with multiplicities (n-m, 1, m-1)."""
    zeta = np.asarray(zeta, dtype=float)
    beta_t = 2.0 * a * b * zeta + a * (1.0 - zeta) + 2.0 - n
    vals = ((n - m) + beta_t, (n - m) + (n - 1) * a * (1.0 - zeta), (2 - m) + beta_t)
    return vals, (n - m, 1, m - 1)


def expand_blocks(vals, mults) -> np.ndarray:
    """Stack block values into spectra along the last axis."""
    cols = []
    for v, mlt in zip(vals, mults):
        cols.extend([np.asarray(v, dtype=float)] * mlt)
    return np.stack(np.broadcast_arrays(*cols), axis=-1)


def psi_structure_spectra(n: int, m: int, a: float, b: float, zeta) -> np.ndarray:
    return expand_blocks(*psi_structure_blocks(n, m, a, b, zeta))


@dataclass(frozen=True)
class PsiCertificate:
    holds: bool
    zeta: np.ndarray
    margins: np.ndarray
    worst_zeta: float
    worst_margin: float


def psi_certificate(n: int, k: int, m: int, a: float, b: float, zeta=None, tol: float = 1e-10) -> PsiCertificate:
    """Supersolution certificate: every sampled lambda(A_m + B_ab(zeta)) lies outside closed Gamma_k."""
    if zeta is None:
        zeta = np.linspace(0.01, 0.99, 99)
    zeta = np.asarray(zeta, dtype=float)
    margins = gamma_margin(psi_structure_spectra(n, m, a, b, zeta), k)
    i = int(np.argmax(margins))
    return PsiCertificate(bool(np.all(margins < -tol)), zeta, margins, float(zeta[i]), float(margins[i]))


def psi_feasible_region(n: int, k: int, m: int, a_values, ab_values, zeta=None) -> np.ndarray:
    """Boolean table over (a, a*b) pairs where the psi certificate holds."""
    out = np.zeros((len(a_values), len(ab_values)), dtype=bool)
    for i, a in enumerate(a_values):
        for j, ab in enumerate(ab_values):
            out[i, j] = psi_certificate(n, k, m, a, ab / a, zeta).holds
    return out


def codim_psi(n: int, k: int, m: int, a: float, b: float, c: float, d: float) -> RadialProfile:
    """(c rho^{-a} + d)^b near a codimension-m set."""
    _check_nk(n, k)
    if not (a > 0 and b > 0 and c > 0 and d > 0):
        raise DomainError("a, b, c, d must be positive")
    cert = psi_certificate(n, k, m, a, b)
    p = {"k": k, "m": m, "a": float(a), "b": float(b), "c": float(c), "d": float(d)}
    return RadialProfile(
        "CodimPsi", n, p, (0.0, inf, False, False), "rho", "supersolution",
        {"holds": cert.holds, "worst_zeta": cert.worst_zeta, "worst_margin": cert.worst_margin},
    )


def psi_zeta(profile: RadialProfile, rho):
    return _psi_zeta(profile.params, np.asarray(rho, dtype=float))[0]


def model_codim_jet(x, m: int):
    """Distance to {last m coordinates = 0} with its gradient and Hessian."""
    x = np.asarray(x, dtype=float)
    n = x.shape[0]
    if not (1 <= m <= n):
        raise DomainError(f"codimension m={m} outside 1..{n}")
    y = x[n - m:]
    rho = float(np.linalg.norm(y))
    if rho == 0.0:
        raise DomainError("point lies on the model set")
    e = y / rho
    grad = np.zeros(n)
    grad[n - m:] = e
    hess = np.zeros((n, n))
    hess[n - m:, n - m:] = (np.eye(m) - np.outer(e, e)) / rho
    return rho, grad, hess


def distance_point_jet(profile, x, m: int = 1, tag: str = "V") -> PointJet:
    """Jet at ``x`` of a profile in rho, with rho the distance to the model codimension-m set."""
    rho, g, H = model_codim_jet(x, m)
    if tag == "V":
        v, v1, v2 = profile.v_jet(rho)
        return PointJet(float(v), float(v1) * g, float(v2) * np.outer(g, g) + float(v1) * H, "V")
    u, u1, u2 = profile.u_jet(rho)
    return PointJet(float(u), float(u1) * g, float(u2) * np.outer(g, g) + float(u1) * H, "U")


def codim_calw_spectra(profile, rho, m: int = 1):
    """Spectra of calW[v] for a rho-profile in the flat codimension-m model, and v itself.

    Blocks: flat directions (n-m), the normal direction (1), the tangential
    normal directions (m-1).
    """
    n = profile.n
    rho = np.asarray(rho, dtype=float)
    v, v1, v2 = profile.v_jet(rho)
    lap = v2 + (m - 1) * v1 / rho
    s0 = lap / (n - 2) + v1 * v1
    vals = (s0, v2 - v1 * v1 + s0, v1 / rho + s0)
    return expand_blocks(vals, (n - m, 1, m - 1)), v


def codim_normalized_spectra(profile, rho, m: int = 1) -> np.ndarray:
    """Spectra of (n-2) e^{-2v} calW[v]; may overflow where v is very negative."""
    lam, v = codim_calw_spectra(profile, rho, m)
    return (profile.n - 2) * np.exp(-2.0 * v)[..., None] * lam


@dataclass(frozen=True)
class BarrierCheck:
    holds: bool
    rho: np.ndarray
    gap: np.ndarray
    margin: np.ndarray
    worst: float

    def __bool__(self):
        return self.holds


def pure_barrier_check(profile, k: int, rho, m: int = 1, side: str = "sub", tol: float = 0.0) -> BarrierCheck:
    """Pointwise check of sigma_k^{1/k}(W[u]) >= (sub) or <= (super) (n-2)/2 u^{(n+2)/(n-2)}.

    ``gap`` is the scale-free quantity sigma_k^{1/k}(mu) - 1 on the normalized
    spectrum mu = (n-2) e^{-2v} calW[v], evaluated through logarithms so that
    very small barriers do not overflow.  A supersolution may instead leave
    the closed cone.
    """
    rho = np.asarray(rho, dtype=float)
    lam, v = codim_calw_spectra(profile, rho, m)
    unit = lam / np.max(np.abs(lam), axis=-1, keepdims=True)
    margin = gamma_margin(unit, k)
    sk = sigma_all(lam, k)[k]
    with np.errstate(invalid="ignore", divide="ignore"):
        log_ratio = np.log(profile.n - 2) - 2.0 * v + np.log(sk) / k
        gap = np.where(sk > 0, np.expm1(np.minimum(log_ratio, 700.0)), np.where(sk == 0, -1.0, np.nan))
    if side == "sub":
        ok = (margin > 0) & (gap >= -tol)
        worst = float(np.nanmin(np.where(margin > 0, gap, -inf)))
    elif side == "super":
        outside = margin < -CONE_BOUNDARY_TOL
        ok = outside | (gap <= tol)
        worst = float(np.nanmax(np.where(outside, -inf, gap)))
    else:
        raise DomainError("side must be 'sub' or 'super'")
    return BarrierCheck(bool(np.all(ok)), rho, gap, margin, worst)


def phi_limit_spectrum(profile: RadialProfile, rho: float) -> np.ndarray:
    """Eigenvalues of rho^{n/2+1} W[phi] at distance ``rho`` from the model set, by full matrix assembly."""
    from .conformal import jacobi_eigen, w_from_jet

    n, m = profile.n, profile.params["m"]
    x = np.zeros(n)
    x[n - 1] = rho
    jet = distance_point_jet(profile, x, m, "U")
    return jacobi_eigen(rho ** (0.5 * n + 1.0) * w_from_jet(jet))


# ---------------------------------------------------------------------------
# Dirichlet subsolution for the general equation on a ball or annulus


class SubsolutionSearchError(RuntimeError):
    pass


@dataclass(frozen=True)
class GluedSubsolution:
    profile: RadialProfile
    margin: float
    grid: np.ndarray
    residual: np.ndarray
    attempts: int


def _general_residual_from_vjet(n, spec: EquationSpec, x, v, v1, v2):
    lam_r, lam_t = radial_eigen_arrays(v, v1, v2, x, n, "V")
    scale = (n - 2) * np.exp(-2.0 * v)
    alpha, alpha0 = spec.coefficients(x)
    g, _, _, margin = normalized_operator(scale * lam_r, scale * lam_t, spec, alpha, alpha0)
    return g, margin


def dirichlet_subsolution(
    spec: EquationSpec,
    a: float,
    b: float,
    phi_a: float | None,
    phi_b: float,
    eps_smooth: float = 0.05,
    grid_points: int = 4001,
    max_attempts: int = 60,
) -> GluedSubsolution:
    """Strict subsolution of the general equation with boundary values phi (in v).

    ``a = 0`` gives the ball of radius ``b`` (``phi_a`` ignored).  The
    constants are found by search: C grows until the interior barrier w is a
    strict subsolution lying below the data by at least ``eps_smooth``; then
    delta shrinks until each boundary collar eta is a strict subsolution
    falling below w by ``eps_smooth`` at rho = delta.  The glued profile is
    certified on a grid that is refined toward both ends.
    """
    if spec.mode != "general":
        raise DomainError("the glued subsolution targets the general equation")
    n = spec.n
    if not (0 <= a < b):
        raise DomainError("need 0 <= a < b")
    R = 2.0 * b
    phis = [phi_b] + ([phi_a] if a > 0 else [])
    C = max(0.0, -log(R * R - b * b) - min(phis) + 2.0 * eps_smooth)
    delta = min(0.25 * (b - a), 0.5)
    lo = a if a > 0 else 0.0

    # verification grid: geometric toward each end plus a uniform bulk
    def grid_for(delta):
        pieces = [np.linspace(lo, b, grid_points)]
        tiny = np.geomspace(1e-12 * (b - a), delta, 400)
        pieces.append(b - tiny)
        if a > 0:
            pieces.append(a + tiny)
        pieces.append([b])
        if a > 0:
            pieces.append([a])
        return np.unique(np.clip(np.concatenate(pieces), lo, b))

    attempts = 0
    last = ""
    while attempts < max_attempts:
        attempts += 1
        params = {
            "k": spec.k, "alpha": float(spec.alpha), "alpha0": float(spec.alpha0),
            "a": float(a), "b": float(b), "phi_a": float(phi_a if a > 0 else 0.0), "phi_b": float(phi_b),
            "R": R, "C": C, "delta": delta, "eps": float(eps_smooth),
        }
        x = grid_for(delta)
        (w, w1, w2), (v, v1, v2) = _glued_vjets(params, n, x)
        gw, mw = _general_residual_from_vjet(n, spec, x, w, w1, w2)
        if not (np.all(mw > 0) and np.all(gw > 0)):
            C += 1.0
            last = f"interior barrier residual {np.nanmin(gw):.3e}"
            continue
        below = []
        for end_r, phi in ((b, phi_b),) + (((a, phi_a),) if a > 0 else ()):
            w_end = -log(R * R - end_r * end_r) - C
            below.append(phi - w_end)
        if min(below) < eps_smooth:
            C += 1.0
            last = "w not below boundary data by eps"
            continue
        # eta below w by eps at rho = delta
        ok_eta = True
        for end_r, rho_dir, phi in ((b, -1.0, phi_b),) + (((a, 1.0, phi_a),) if a > 0 else ()):
            r_d = end_r + rho_dir * delta
            eta_d = 2.0 * log(delta) - log(delta + delta * delta) + phi
            w_d = -log(R * R - r_d * r_d) - C
            if eta_d - w_d > -eps_smooth:
                ok_eta = False
        g, margin = _general_residual_from_vjet(n, spec, x, v, v1, v2)
        if ok_eta and np.all(margin > 0) and np.all(g > 0):
            prof = RadialProfile("DirichletSub", n, params, (lo, float(b), True, True), "r", "subsolution")
            return GluedSubsolution(prof, float(np.min(g)), x, g, attempts)
        last = "collar eta not separated from w" if not ok_eta else f"glued residual {np.nanmin(g):.3e}"
        delta *= 0.5
    raise SubsolutionSearchError(f"no certified subsolution after {attempts} attempts: {last}")


def harmonic_upper_bound(n: int, a: float, b: float, phi_a: float | None, phi_b: float) -> RadialProfile:
    """Radial harmonic function with boundary values e^{(n-2) phi / 2}; bounds u of (k-1)-admissible solutions."""
    hb = np.exp(0.5 * (n - 2) * phi_b)
    if a <= 0:
        A, B = hb, 0.0
    else:
        ha = np.exp(0.5 * (n - 2) * phi_a)
        pa, pb = a ** (2 - n), b ** (2 - n)
        B = (ha - hb) / (pa - pb)
        A = hb - B * pb
    p = {"A": float(A), "B": float(B), "a": float(a), "b": float(b)}
    lo = a if a > 0 else 0.0
    return RadialProfile("HarmonicUpper", n, p, (lo, float(b), True, True), "r", "upper_bound")
