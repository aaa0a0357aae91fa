"""Conformal curvature operators W[u], calW[v] and the equation residuals.

Background metric is Euclidean throughout (Ric = 0).  ``u`` is the conformal
factor of g_u = u^{4/(n-2)} g and ``v = (2/(n-2)) ln u`` its log-variable.
"""

from __future__ import annotations

from dataclasses import dataclass
from math import comb
from typing import Callable, Union

import numpy as np

from .symfun import (
    DomainError,
    TwoBlockSpectrum,
    gamma_margin,
    sigma_all,
    sigma_gradient,
    two_block_sigmas,
)

Coefficient = Union[float, Callable[[float], float]]


class JacobiError(RuntimeError):
    """Cyclic Jacobi iteration failed to reach the off-diagonal tolerance."""


@dataclass(frozen=True)
class PointJet:
    """Value, gradient and Hessian of ``u`` (tag ``"U"``) or ``v`` (tag ``"V"``) at one point."""

    value: float
    grad: np.ndarray
    hess: np.ndarray
    tag: str = "U"

    def __post_init__(self):
        grad = np.asarray(self.grad, dtype=float)
        hess = np.asarray(self.hess, dtype=float)
        n = grad.shape[0]
        if grad.ndim != 1 or hess.shape != (n, n):
            raise DomainError("jet needs an n-vector gradient and an n x n Hessian")
        if self.tag not in ("U", "V"):
            raise DomainError(f"unknown variable tag {self.tag!r}")
        if self.tag == "U" and not self.value > 0:
            raise DomainError("a U-jet needs a positive value")
        scale = max(1.0, float(np.abs(hess).max()))
        if np.abs(hess - hess.T).max() > 1e-14 * scale:
            raise DomainError("Hessian is not symmetric")
        object.__setattr__(self, "grad", grad)
        object.__setattr__(self, "hess", 0.5 * (hess + hess.T))

    @property
    def n(self) -> int:
        return self.grad.shape[0]

    def scaled(self, c: float) -> "PointJet":
        if self.tag != "U":
            raise DomainError("only U-jets scale multiplicatively")
        return PointJet(c * self.value, c * self.grad, c * self.hess, "U")

    def to_v(self) -> "PointJet":
        """Jet of v = (2/(n-2)) ln u."""
        if self.tag == "V":
            return self
        n, u, g = self.n, self.value, self.grad
        f = 2.0 / (n - 2)
        return PointJet(
            f * np.log(u), f * g / u, f * (self.hess / u - np.outer(g, g) / u**2), "V"
        )

    def to_u(self) -> "PointJet":
        if self.tag == "U":
            return self
        n, v, g = self.n, self.value, self.grad
        f = 0.5 * (n - 2)
        u = np.exp(f * v)
        return PointJet(u, u * f * g, u * (f * self.hess + f * f * np.outer(g, g)), "U")


@dataclass(frozen=True)
class EquationSpec:
    """Selects sigma_k^{1/k}(W[u]) = (n-2)/2 u^{(n+2)/(n-2)} (pure) or the
    sigma_k + alpha sigma_{k-1} = alpha0 generalization (general)."""

    n: int
    k: int
    alpha: Coefficient | None = None
    alpha0: Coefficient | None = None

    def __post_init__(self):
        if self.n < 3:
            raise DomainError("dimension n must be at least 3")
        if not (1 <= self.k <= self.n):
            raise DomainError(f"k={self.k} outside 1..{self.n}")
        general = self.alpha is not None or self.alpha0 is not None
        if general:
            if self.alpha is None or self.alpha0 is None:
                raise DomainError("general mode needs both alpha and alpha0")
            if self.k < 2:
                raise DomainError("general mode needs k >= 2")
            if not callable(self.alpha0) and not self.alpha0 > 0:
                raise DomainError("alpha0 must be positive")

    @classmethod
    def pure(cls, n: int, k: int) -> "EquationSpec":
        return cls(n, k)

    @classmethod
    def general(cls, n: int, k: int, alpha: Coefficient, alpha0: Coefficient) -> "EquationSpec":
        return cls(n, k, alpha, alpha0)

    @property
    def mode(self) -> str:
        return "pure" if self.alpha is None else "general"

    @property
    def cone(self) -> int:
        """Index of the Garding cone in which the equation is elliptic."""
        return self.k if self.mode == "pure" else self.k - 1

    def coefficients(self, r):
        """(alpha, alpha0) evaluated at radius ``r`` (scalar or array)."""
        r = np.asarray(r, dtype=float)

        def ev(c):
            if callable(c):
                out = np.vectorize(c, otypes=[float])(r)
            else:
                out = np.full(r.shape, float(c))
            return out

        alpha, alpha0 = ev(self.alpha), ev(self.alpha0)
        if np.any(alpha0 <= 0):
            raise DomainError("alpha0 must be positive pointwise")
        return alpha, alpha0

    def to_dict(self) -> dict:
        out = {"n": self.n, "k": self.k, "mode": self.mode}
        if self.mode == "general":
            if callable(self.alpha) or callable(self.alpha0):
                raise TypeError("only constant coefficients serialize")
            out.update(alpha=float(self.alpha), alpha0=float(self.alpha0))
        return out


@dataclass(frozen=True)
class ConeViolation:
    """Returned instead of a residual when the spectrum leaves the ellipticity cone."""

    margin: float
    cone: int

    def __bool__(self):
        return False


@dataclass(frozen=True)
class LinearizationData:
    eigvals: np.ndarray
    F_value: float
    F_eig_derivs: np.ndarray
    G_v: float
    trace_F: float


# ---------------------------------------------------------------------------
# operator assembly


def w_from_jet(jet: PointJet) -> np.ndarray:
    """W_ij = (n-2) u_ij - n u_i u_j / u + (Lap u + |grad u|^2 / u) delta_ij."""
    if jet.tag != "U":
        jet = jet.to_u()
    n, u, g, H = jet.n, jet.value, jet.grad, jet.hess
    if not u > 0:
        raise DomainError("W[u] needs u > 0")
    W = (n - 2) * H - n * np.outer(g, g) / u + (np.trace(H) + g @ g / u) * np.eye(n)
    return 0.5 * (W + W.T)


def calw_from_jet(jet: PointJet) -> np.ndarray:
    """calW[v] = Hess v - dv (x) dv + (Lap v / (n-2) + |grad v|^2) I."""
    if jet.tag != "V":
        jet = jet.to_v()
    n, g, H = jet.n, jet.grad, jet.hess
    M = H - np.outer(g, g) + (np.trace(H) / (n - 2) + g @ g) * np.eye(n)
    return 0.5 * (M + M.T)


def normalized_matrix(jet: PointJet) -> np.ndarray:
    """(2/(n-2)) u^{-(n+2)/(n-2)} W[u] = (n-2) e^{-2v} calW[v]."""
    vjet = jet.to_v()
    return (jet.n - 2) * np.exp(-2.0 * vjet.value) * calw_from_jet(vjet)


def jacobi_eigen(M, tol: float = 1e-13, max_sweeps: int = 100) -> np.ndarray:
    """Eigenvalues of a symmetric matrix by cyclic Jacobi rotations, ascending."""
    A = np.array(M, dtype=float)
    n = A.shape[0]
    if A.shape != (n, n):
        raise DomainError("jacobi_eigen needs a square matrix")
    A = 0.5 * (A + A.T)
    norm = np.linalg.norm(A)
    if norm == 0.0 or n == 1:
        return np.sort(np.diag(A))

    mask = ~np.eye(n, dtype=bool)

    def off(B):
        return np.sqrt(np.sum(B[mask] ** 2))

    for _ in range(max_sweeps):
        if off(A) <= tol * norm:
            return np.sort(np.diag(A))
        for p in range(n - 1):
            for q in range(p + 1, n):
                apq = A[p, q]
                if apq == 0.0:
                    continue
                theta = (A[q, q] - A[p, p]) / (2.0 * apq)
                t = np.sign(theta) / (abs(theta) + np.sqrt(theta * theta + 1.0)) if theta != 0 else 1.0
                c = 1.0 / np.sqrt(t * t + 1.0)
                s = t * c
                rp = A[p, :].copy()
                rq = A[q, :].copy()
                A[p, :] = c * rp - s * rq
                A[q, :] = s * rp + c * rq
                cp = A[:, p].copy()
                cq = A[:, q].copy()
                A[:, p] = c * cp - s * cq
                A[:, q] = s * cp + c * cq
                A[p, q] = A[q, p] = 0.0
    if off(A) <= tol * norm:
        return np.sort(np.diag(A))
    raise JacobiError(f"off-diagonal norm {off(A):.3e} above {tol * norm:.3e} after {max_sweeps} sweeps")


def radial_eigen_arrays(value, d1, d2, r, n: int, tag: str = "V"):
    """Radial and tangential eigenvalues of W[u] (tag U) or calW[v] (tag V) for a
    radial profile given by its value and first two r-derivatives.

    Returns ``(radial, tangential)``; the tangential eigenvalue has multiplicity n-1.
    At r = 0 the profile is assumed even (first derivative zero) and the
    spectrum is isotropic.
    """
    value, d1, d2, r = np.broadcast_arrays(*(np.asarray(x, dtype=float) for x in (value, d1, d2, r)))
    center = r == 0.0
    safe_r = np.where(center, 1.0, r)
    d1_over_r = np.where(center, d2, d1 / safe_r)
    d1 = np.where(center, 0.0, d1)
    lap = d2 + (n - 1) * d1_over_r
    if tag == "U":
        if np.any(value <= 0):
            raise DomainError("W[u] needs u > 0")
        sq = d1 * d1 / value
        radial = (n - 2) * d2 - (n - 1) * sq + lap
        tangential = (n - 2) * d1_over_r + lap + sq
    elif tag == "V":
        radial = d2 + lap / (n - 2)
        tangential = d1_over_r + lap / (n - 2) + d1 * d1
    else:
        raise DomainError(f"unknown variable tag {tag!r}")
    return radial, tangential


def radial_eigen(profile, r: float, n: int, tag: str = "V") -> TwoBlockSpectrum:
    """Closed-form spectrum of W/calW for a radial field at radius ``r``."""
    if r < 0:
        raise DomainError("radius must be nonnegative")
    value, d1, d2 = profile
    a, b = radial_eigen_arrays(value, d1, d2, r, n, tag)
    return TwoBlockSpectrum(float(a), 1, float(b), n - 1)


def radial_jet(profile, x, tag: str = "U", center=None) -> PointJet:
    """Embed a radial profile (value, d/dr, d2/dr2) at the Euclidean point ``x``."""
    x = np.asarray(x, dtype=float)
    if center is not None:
        x = x - np.asarray(center, dtype=float)
    n = x.shape[0]
    value, d1, d2 = profile
    r = np.linalg.norm(x)
    if r == 0.0:
        return PointJet(value, np.zeros(n), d2 * np.eye(n), tag)
    e = x / r
    P = np.outer(e, e)
    return PointJet(value, d1 * e, d2 * P + (d1 / r) * (np.eye(n) - P), tag)


# ---------------------------------------------------------------------------
# residuals


def _eigs(jet: PointJet) -> np.ndarray:
    return jacobi_eigen(normalized_matrix(jet))


def residual(jet: PointJet, spec: EquationSpec, r: float | None = None):
    """Pointwise residual, or a ConeViolation carrying the cone margin.

    pure:    sigma_k^{1/k}(W[u]) - (n-2)/2 u^{(n+2)/(n-2)}
    general: sigma_k(M) + alpha sigma_{k-1}(M) - alpha0, M = (2/(n-2)) u^{-(n+2)/(n-2)} W[u]

    ``r`` is the radius at which coefficient fields are sampled.
    """
    n, k = spec.n, spec.k
    mu = _eigs(jet)
    margin = gamma_margin(mu, spec.cone)
    if spec.mode == "pure":
        if margin < -1e-12:
            return ConeViolation(margin, spec.cone)
        ujet = jet.to_u()
        scale = 0.5 * (n - 2) * ujet.value ** ((n + 2) / (n - 2))
        return scale * (max(sigma_all(mu, k)[k], 0.0) ** (1.0 / k) - 1.0)
    if margin <= 0:
        return ConeViolation(margin, spec.cone)
    alpha, alpha0 = spec.coefficients(0.0 if r is None else r)
    s = sigma_all(mu, k)
    return float(s[k] + alpha * s[k - 1] - alpha0)


def relative_residual(jet: PointJet, spec: EquationSpec, r: float | None = None):
    """Scale-free residual: pure mode divides by (n-2)/2 u^{(n+2)/(n-2)}."""
    if spec.mode == "general":
        return residual(jet, spec, r)
    mu = _eigs(jet)
    margin = gamma_margin(mu, spec.k)
    if margin < -1e-12:
        return ConeViolation(margin, spec.k)
    return max(sigma_all(mu, spec.k)[spec.k], 0.0) ** (1.0 / spec.k) - 1.0


def f_operator(lam, v, n: int, k: int, alpha0):
    """F(calW) = sigma_k/sigma_{k-1} - alpha0 e^{2kv} / ((n-2)^k sigma_{k-1}) on eigenvalues.

    Vectorized over leading axes of ``lam``; returns (F, dF/dlam_i, G_v).
    """
    lam = np.asarray(lam, dtype=float)
    s = sigma_all(lam, k)
    gk = sigma_gradient(lam, k)
    gk1 = sigma_gradient(lam, k - 1)
    sk, sk1 = s[k], s[k - 1]
    A = np.asarray(alpha0) * np.exp(2.0 * k * np.asarray(v)) / (n - 2) ** k
    F = sk / sk1 - A / sk1
    dF = (gk * sk1[..., None] - sk[..., None] * gk1) / (sk1**2)[..., None] + (A / sk1**2)[..., None] * gk1
    G_v = -2.0 * k * A / sk1
    return F, dF, G_v


def f_linearize(jet: PointJet, spec: EquationSpec, r: float | None = None):
    """Eigenbasis linearization of the F operator at a V-jet."""
    if spec.mode != "general":
        raise DomainError("f_linearize applies to the general equation")
    vjet = jet.to_v()
    lam = jacobi_eigen(calw_from_jet(vjet))
    margin = gamma_margin(lam, spec.k - 1)
    if margin <= 0:
        return ConeViolation(margin, spec.k - 1)
    _, alpha0 = spec.coefficients(0.0 if r is None else r)
    F, dF, G_v = f_operator(lam, vjet.value, spec.n, spec.k, float(alpha0))
    return LinearizationData(lam, float(F), dF, float(G_v), float(dF.sum()))


# ---------------------------------------------------------------------------
# vectorized two-block operator used by the radial solver


def normalized_operator(mu_r, mu_t, spec: EquationSpec, alpha=None, alpha0=None):
    """Degree-one homogeneous operator g on a normalized radial spectrum.

    ``mu_r`` is the radial eigenvalue (multiplicity 1), ``mu_t`` the tangential
    one (multiplicity n-1).  The zero set of g is the equation:

    pure:    g = sigma_k^{1/k}(mu) - 1
    general: g = sigma_k/sigma_{k-1}(mu) + alpha - alpha0 / sigma_{k-1}(mu)

    Returns ``(g, dg/dmu_r, dg/dmu_t, margin)``; dg/dmu_t is summed over the
    tangential block.  Entries outside the cone get ``nan`` values.
    """
    n, k = spec.n, spec.k
    s, da, db = two_block_sigmas(mu_r, 1, mu_t, n - 1, k)
    cone = spec.cone
    margin = np.min(np.stack([s[j] / comb(n, j) for j in range(1, cone + 1)]), axis=0)
    ok = margin > 0
    with np.errstate(all="ignore"):
        if spec.mode == "pure":
            sk = np.where(ok, s[k], 1.0)
            root = sk ** (1.0 / k)
            factor = root / (k * sk)
            g = root - 1.0
            g_r = factor * da[k]
            g_t = factor * db[k]
        else:
            sk, sk1 = s[k], np.where(ok, s[k - 1], 1.0)
            g = sk / sk1 + alpha - alpha0 / sk1
            g_r = (da[k] * sk1 - sk * da[k - 1]) / sk1**2 + alpha0 * da[k - 1] / sk1**2
            g_t = (db[k] * sk1 - sk * db[k - 1]) / sk1**2 + alpha0 * db[k - 1] / sk1**2
    bad = ~ok
    if np.any(bad):
        g = np.where(bad, np.nan, g)
        g_r = np.where(bad, np.nan, g_r)
        g_t = np.where(bad, np.nan, g_t)
    return g, g_r, g_t, margin
