"""Elementary symmetric functions and Garding cone geometry.

All functions accept array_like eigenvalue vectors; the last axis holds the
``n`` eigenvalues and any leading axes are treated as a batch.
"""

from __future__ import annotations

from dataclasses import dataclass
from math import comb

import numpy as np

#: |normalized margin| at or below this value classifies a point as on the cone boundary.
CONE_BOUNDARY_TOL = 1e-10


class DomainError(ValueError):
    """Raised when an argument lies outside the mathematical domain of an operation."""


def _as_spectrum(lam) -> np.ndarray:
    arr = np.asarray(lam, dtype=float)
    if arr.ndim == 0:
        raise DomainError("a spectrum needs at least one eigenvalue")
    if not np.all(np.isfinite(arr)):
        raise DomainError("spectrum entries must be finite")
    return arr


def _check_level(k: int, n: int, allow_zero: bool = False) -> None:
    lo = 0 if allow_zero else 1
    if not (lo <= k <= n):
        raise DomainError(f"level k={k} outside {lo}..{n}")


def sigma_all(lam, k: int) -> np.ndarray:
    """Return sigma_0..sigma_k stacked on the first axis.

    Uses e_j(l_1..l_i) = e_j(l_1..l_{i-1}) + l_i e_{j-1}(l_1..l_{i-1}).
    """
    arr = _as_spectrum(lam)
    n = arr.shape[-1]
    _check_level(k, n, allow_zero=True)
    batch = arr.shape[:-1]
    e = np.zeros((k + 1,) + batch)
    e[0] = 1.0
    for i in range(n):
        li = arr[..., i]
        for j in range(min(i + 1, k), 0, -1):
            e[j] = e[j] + li * e[j - 1]
    return e


def sigma(lam, k: int):
    """k-th elementary symmetric function of the eigenvalues ``lam``."""
    arr = _as_spectrum(lam)
    _check_level(k, arr.shape[-1], allow_zero=True)
    out = sigma_all(arr, k)[k]
    return float(out) if out.ndim == 0 else out


def sigma_partial(lam, k: int, i: int):
    """d sigma_k / d lam_i, i.e. sigma_{k-1} of ``lam`` with entry ``i`` deleted."""
    arr = _as_spectrum(lam)
    n = arr.shape[-1]
    _check_level(k, n)
    if not (-n <= i < n):
        raise DomainError(f"index {i} outside a spectrum of length {n}")
    reduced = np.delete(arr, i, axis=-1)
    if k == 1:
        out = np.ones(arr.shape[:-1])
    else:
        out = sigma_all(reduced, k - 1)[k - 1]
    return float(out) if out.ndim == 0 else out


def sigma_gradient(lam, k: int) -> np.ndarray:
    """All partials d sigma_k / d lam_i, same shape as ``lam``."""
    arr = _as_spectrum(lam)
    n = arr.shape[-1]
    _check_level(k, n, allow_zero=True)
    if k == 0:
        return np.zeros_like(arr)
    grad = np.empty_like(arr)
    for i in range(n):
        reduced = np.delete(arr, i, axis=-1)
        grad[..., i] = sigma_all(reduced, k - 1)[k - 1]
    return grad


def gamma_margin(lam, k: int):
    """min_{j<=k} sigma_j(lam) / C(n, j).

    Positive exactly on the open cone Gamma_k; the all-ones vector has margin 1.
    """
    arr = _as_spectrum(lam)
    n = arr.shape[-1]
    _check_level(k, n)
    e = sigma_all(arr, k)
    scaled = np.stack([e[j] / comb(n, j) for j in range(1, k + 1)])
    out = scaled.min(axis=0)
    return float(out) if out.ndim == 0 else out


def in_cone(lam, k: int, tol: float = 0.0):
    return gamma_margin(lam, k) > tol


def on_cone_boundary(lam, k: int, tol: float = CONE_BOUNDARY_TOL):
    return np.abs(gamma_margin(lam, k)) <= tol


@dataclass(frozen=True)
class TwoBlockSpectrum:
    """A spectrum with value ``a`` repeated ``mult_a`` times and ``b`` repeated ``mult_b`` times."""

    a: float
    mult_a: int
    b: float
    mult_b: int

    def __post_init__(self):
        if self.mult_a < 1 or self.mult_b < 0:
            raise DomainError("multiplicities must satisfy mult_a >= 1, mult_b >= 0")

    @property
    def n(self) -> int:
        return self.mult_a + self.mult_b

    def expand(self) -> np.ndarray:
        return np.array([self.a] * self.mult_a + [self.b] * self.mult_b, dtype=float)

    def is_isotropic(self, rtol: float = 1e-12) -> bool:
        if self.mult_b == 0:
            return True
        scale = max(abs(self.a), abs(self.b), 1e-300)
        return abs(self.a - self.b) <= rtol * scale


def two_block_sigmas(a, mult_a: int, b, mult_b: int, k: int):
    """sigma_0..sigma_k of a two-block spectrum plus their block derivatives.

    Returns ``(s, ds_da, ds_db)`` each of shape ``(k + 1,) + broadcast(a, b).shape``.
    ``ds_da`` is the derivative with respect to the shared value ``a`` (that is,
    summed over the ``mult_a`` entries), likewise for ``ds_db``.
    """
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    shape = np.broadcast(a, b).shape
    s = np.zeros((k + 1,) + shape)
    ds_da = np.zeros_like(s)
    ds_db = np.zeros_like(s)
    for order in range(k + 1):
        for j in range(0, min(order, mult_a) + 1):
            rest = order - j
            if rest > mult_b:
                continue
            coef = comb(mult_a, j) * comb(mult_b, rest)
            s[order] += coef * a**j * b**rest
            if j > 0:
                ds_da[order] += coef * j * a ** (j - 1) * b**rest
            if rest > 0:
                ds_db[order] += coef * rest * a**j * b ** (rest - 1)
    return s, ds_da, ds_db


def sigma_two_block(tb: TwoBlockSpectrum, k: int) -> float:
    """sigma_k of the expanded two-block spectrum, by the binomial convolution."""
    _check_level(k, tb.n, allow_zero=True)
    total = 0.0
    for j in range(0, min(k, tb.mult_a) + 1):
        if k - j > tb.mult_b:
            continue
        total += comb(tb.mult_a, j) * comb(tb.mult_b, k - j) * tb.a**j * tb.b ** (k - j)
    return float(total)


def vm_vector(n: int, m: int) -> TwoBlockSpectrum:
    """Model spectrum of a codimension-``m`` boundary piece in dimension ``n``."""
    if n < 1 or not (1 <= m <= n):
        raise DomainError(f"codimension m={m} outside 1..{n}")
    return TwoBlockSpectrum(a=float(n - m), mult_a=n - m + 1, b=float(2 - m), mult_b=m - 1)


def sigma1_vm(n: int, m: int) -> int:
    """Closed form of sigma_1(v_m) = (n - m + 1)(n - m) + (m - 1)(2 - m) = (n - 1)(n + 2 - 2m)."""
    return (n - m + 1) * (n - m) + (m - 1) * (2 - m)


def newton_maclaurin_constant(n: int, k: int) -> float:
    """c(n, k) in sigma_k sigma_{k-2} <= c(n, k) sigma_{k-1}^2."""
    return (n - k + 1) * (k - 1) / ((n - k + 2) * k)
