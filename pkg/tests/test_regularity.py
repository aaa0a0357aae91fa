import itertools
from math import prod

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from kricci.mesh import Annulus, Ball, BoundaryClustered, Uniform, build_mesh
from kricci.profiles import exterior_ball, interior_ball
from kricci.regularity import (
    BORDERLINE,
    NOT_REGULAR,
    OPEN_MARKER,
    REGULAR,
    GrowthFitError,
    classify,
    fit_growth,
    growth_coefficient,
    verdict_table,
    vm_sigmas_exact,
)
from kricci.solver import RadialField, sample_profile
from kricci.symfun import DomainError, sigma, vm_vector


def brute_vm_sigmas(n, m, k):
    vm = [n - m] * (n - m + 1) + [2 - m] * (m - 1)
    return [sum(prod(c) for c in itertools.combinations(vm, j)) for j in range(1, k + 1)]


def test_examples():
    v = classify(5, 2, 2)
    assert v.verdict == REGULAR and v.vm_sigma == (12, 54)
    v = classify(4, 3, 2)
    assert v.verdict == NOT_REGULAR and v.vm_sigma[1] == -2
    v = classify(4, 3, 1)
    assert v.verdict == BORDERLINE and v.is_open and v.label() == f"{BORDERLINE} ({OPEN_MARKER})"


@pytest.mark.parametrize("n", range(3, 31))
def test_k1_threshold(n):
    for m in range(1, n + 1):
        verdict = classify(n, m, 1).verdict
        if 2 * m < n + 2:
            assert verdict == REGULAR
        elif 2 * m == n + 2:
            assert verdict == BORDERLINE
        else:
            assert verdict == NOT_REGULAR
        s1 = (n - m + 1) * (n - m) + (m - 1) * (2 - m)
        assert verdict == (REGULAR if s1 > 0 else BORDERLINE if s1 == 0 else NOT_REGULAR)


@pytest.mark.parametrize("n", range(3, 11))
def test_exact_sigmas_match_expansion(n):
    for m in range(1, n + 1):
        exact = vm_sigmas_exact(n, m, n)
        assert exact == brute_vm_sigmas(n, m, n)
        vm = vm_vector(n, m).expand()
        for j, s in enumerate(exact, start=1):
            assert sigma(vm, j) == pytest.approx(s, rel=1e-12, abs=1e-9)


@settings(max_examples=300, deadline=None)
@given(st.integers(3, 12), st.data())
def test_monotone_in_k(n, data):
    m = data.draw(st.integers(1, n))
    k = data.draw(st.integers(2, n))
    if classify(n, m, k).verdict == REGULAR:
        assert all(classify(n, m, j).verdict == REGULAR for j in range(1, k))


def test_classify_rejects_bad_input():
    with pytest.raises(DomainError):
        classify(2, 1, 1)
    with pytest.raises(DomainError):
        classify(5, 6, 1)


def test_verdict_table_shape():
    rows = verdict_table(range(3, 6))
    assert len(rows) == sum(n * n for n in range(3, 6))
    rows = verdict_table([5], [2], [1, 2])
    assert [r.verdict for r in rows] == [REGULAR, REGULAR]


def test_growth_coefficient_values():
    assert growth_coefficient(3, 1) == pytest.approx(6 ** 0.25, rel=1e-15)
    assert growth_coefficient(3, 1) == pytest.approx(1.56508, abs=5e-6)
    assert growth_coefficient(4, 1) == pytest.approx(12 ** 0.5, rel=1e-15)
    assert growth_coefficient(5, 2) == pytest.approx((4 * 10 ** 0.5) ** 0.75, rel=1e-15)
    for n in range(3, 9):
        assert growth_coefficient(n, 1) == pytest.approx((n * (n - 1)) ** ((n - 2) / 4), rel=1e-14)


@pytest.mark.parametrize("n,k", [(3, 1), (5, 2), (6, 3)])
def test_fit_on_closed_form(n, k):
    mesh = build_mesh(Ball(1.0), 2000, BoundaryClustered(("hi",), 1e-10))
    v = np.empty(mesh.N + 1)
    v[:-1] = sample_profile(mesh, interior_ball(n, k, 1.0), np.arange(mesh.N))
    v[-1] = 2 * v[-2]  # finite stand-in at the singular end; the window never reaches it
    fit = fit_growth(RadialField(mesh, v), n)
    assert abs(fit.estimate / growth_coefficient(n, k) - 1) <= 1e-3
    assert fit.nodes >= 8 and fit.slope == pytest.approx(1 - n / 2, abs=0.25)
    prof_fit = fit_growth(interior_ball(n, k, 1.0), n, mesh=mesh)
    assert prof_fit.estimate == pytest.approx(fit.estimate, rel=1e-10)


def test_fit_at_inner_end_of_exterior_solution():
    n, k = 4, 2
    mesh = build_mesh(Annulus(1.0, 4.0), 2000, BoundaryClustered(("lo",), 1e-10))
    fit = fit_growth(exterior_ball(n, k, 1.0), n, end="lo", mesh=mesh)
    assert abs(fit.estimate / growth_coefficient(n, k) - 1) <= 1e-3


def test_fit_rejections():
    mesh = build_mesh(Ball(1.0), 400, BoundaryClustered(("hi",), 1e-10))
    with pytest.raises(GrowthFitError, match="divergence"):
        fit_growth(RadialField(mesh, np.zeros(401)), 3)
    with pytest.raises(GrowthFitError, match="nodes"):
        fit_growth(RadialField(mesh, np.zeros(401)), 3, window=(0.5, 0.5001))
    with pytest.raises(DomainError):
        fit_growth(RadialField(mesh, np.zeros(401)), 3, end="lo")
    coarse = build_mesh(Ball(1.0), 16, Uniform())
    with pytest.raises(GrowthFitError):
        fit_growth(RadialField(coarse, np.zeros(17)), 3)
