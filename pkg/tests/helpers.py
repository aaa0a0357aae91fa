"""Shared oracles for the test suite: dense Jacobians and sample generators."""

import numpy as np

from kricci.solver import RadialField, assemble


def dense_jacobian(asm):
    m = len(asm.free)
    J = np.zeros((m, m))
    idx = np.arange(m)
    J[idx, idx] = asm.banded[1]
    J[idx[:-1], idx[:-1] + 1] = asm.banded[0, 1:]
    J[idx[1:], idx[1:] - 1] = asm.banded[2, :-1]
    return J


def jacobian_mismatch(field, spec, step=1e-8):
    """max |J - J_fd| / max |J| with a central-difference Jacobian of the residual."""
    asm = assemble(field, spec)
    J = dense_jacobian(asm)
    fd = np.zeros_like(J)
    for col, node in enumerate(asm.free):
        plus, minus = field.v.copy(), field.v.copy()
        plus[node] += step
        minus[node] -= step
        rp = assemble(RadialField(field.mesh, plus), spec, jacobian=False).residual
        rm = assemble(RadialField(field.mesh, minus), spec, jacobian=False).residual
        fd[:, col] = (rp - rm) / (2 * step)
    return float(np.max(np.abs(J - fd)) / np.max(np.abs(J)))


def cone_samples(rng, n, k, count, spread=1.5):
    """``count`` random spectra of length n inside Gamma_k (rejection sampling around the ones vector)."""
    from kricci.symfun import gamma_margin

    out = []
    while len(out) < count:
        batch = 1.0 + spread * rng.normal(size=(4 * count, n))
        batch *= rng.uniform(0.1, 10.0, size=(4 * count, 1))
        keep = batch[gamma_margin(batch, k) > 0]
        out.extend(keep[: count - len(out)])
    return np.array(out)
