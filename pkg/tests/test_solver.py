import numpy as np
import pytest
from helpers import jacobian_mismatch

from kricci.conformal import EquationSpec, radial_jet, relative_residual
from kricci.mesh import Annulus, Ball, BoundaryClustered, Uniform, build_mesh
from kricci.profiles import (
    dirichlet_subsolution,
    exterior_ball,
    general_radial,
    harmonic_upper_bound,
    interior_ball,
    upper_barrier_ball,
)
from kricci.solver import (
    ConeViolationError,
    RadialField,
    SolverConfig,
    assemble,
    blowup_ball,
    estimate_order,
    newton,
    oracle_error,
    sample_profile,
    solve_blowup,
    solve_dirichlet,
    solve_maximal,
    transfer,
)
from kricci.symfun import DomainError

FAST = SolverConfig(continuation_steps=8, max_halvings=4)


def annulus_oracle_solve(n, k, N, spec=None, oracle=None, config=FAST):
    spec = spec or EquationSpec(n, k)
    oracle = oracle or exterior_ball(n, k, 1.0)
    mesh = build_mesh(Annulus(1.5, 3.0), N)
    ref = RadialField.from_profile(mesh, oracle)
    init = interior_ball(n, k, 6.0) if spec.mode == "pure" else general_radial(n, k, spec.alpha, spec.alpha0, 6.0)
    return solve_dirichlet(mesh, {"lo": ref.v[0], "hi": ref.v[-1]}, spec, config, RadialField.from_profile(mesh, init))


@pytest.mark.parametrize("spec", [EquationSpec(3, 1), EquationSpec(5, 3), EquationSpec(4, 2, -1.0, 3.0)], ids=str)
@pytest.mark.parametrize("domain", [Ball(1.0), Annulus(0.5, 2.0)], ids=str)
def test_assembly_matches_pointwise_residual(spec, domain):
    # three-point differences are exact on quadratics, so nodal residuals must equal the pointwise operator
    n = spec.n
    mesh = build_mesh(domain, 40, BoundaryClustered(("hi",), 1e-3))
    v = 0.2 + 0.3 * mesh.r**2
    asm = assemble(RadialField(mesh, v), spec, jacobian=False)
    for pos, node in enumerate(asm.free):
        r = mesh.r[node]
        x = np.zeros(n)
        x[0] = r
        jet = radial_jet((v[node], 0.6 * r, 0.6), x, "V")
        expected = relative_residual(jet, spec, r)
        if spec.mode == "general":
            mu = (n - 2) * np.exp(-2 * v[node])
            from kricci.conformal import calw_from_jet, jacobi_eigen
            from kricci.symfun import sigma

            lam = mu * jacobi_eigen(calw_from_jet(jet))
            sk1 = sigma(lam, spec.k - 1)
            expected = expected / sk1
        assert asm.residual[pos] == pytest.approx(expected, rel=1e-9, abs=1e-9)


@pytest.mark.parametrize("n,k", [(3, 1), (5, 2), (6, 4)])
def test_discretization_order_on_exact_field(n, k):
    prof = interior_ball(n, k, 1.5)
    errs = []
    for N in (50, 100, 200, 400):
        mesh = build_mesh(Ball(1.0), N)
        errs.append(np.max(np.abs(assemble(RadialField.from_profile(mesh, prof), EquationSpec(n, k), False).residual)))
    orders = np.log2(np.array(errs[:-1]) / np.array(errs[1:]))
    assert np.all((orders >= 1.8) & (orders <= 2.2))


@pytest.mark.parametrize(
    "spec, prof",
    [
        (EquationSpec(3, 1), interior_ball(3, 1, 6.0)),
        (EquationSpec(5, 2), interior_ball(5, 2, 6.0)),
        (EquationSpec(8, 8), interior_ball(8, 8, 6.0)),
        (EquationSpec(4, 2, -1.0, 3.0), general_radial(4, 2, -1.0, 3.0, 6.0)),
    ],
    ids=lambda x: str(x)[:40],
)
@pytest.mark.parametrize("domain", [Annulus(1.5, 3.0), Ball(1.0)], ids=str)
def test_jacobian_matches_differences(spec, prof, domain):
    mesh = build_mesh(domain, 40)
    field = RadialField.from_profile(mesh, prof)
    field = RadialField(mesh, field.v + 0.002 * np.cos(3 * mesh.r))
    assert np.all(assemble(field, spec, False).margin > 0)
    assert jacobian_mismatch(field, spec) <= 1e-5


def test_inadmissible_start_is_reported():
    mesh = build_mesh(Annulus(1.0, 2.0), 32)
    with pytest.raises(ConeViolationError) as info:
        newton(RadialField(mesh, -mesh.r**2), EquationSpec(4, 2), SolverConfig())
    assert info.value.margin <= 0 and 0 < info.value.node < 32


def test_newton_history_and_margins():
    spec = EquationSpec(5, 2)
    mesh = build_mesh(Annulus(1.5, 3.0), 200)
    start = RadialField.from_profile(mesh, exterior_ball(5, 2, 1.0))
    start = RadialField(mesh, start.v + 0.02 * np.sin(np.pi * (mesh.r - 1.5) / 1.5))
    field, rep = newton(start, spec, SolverConfig())
    assert rep.converged
    assert all(a > b for a, b in zip(rep.residual_history, rep.residual_history[1:]))
    assert rep.final_margin >= SolverConfig().margin_floor
    assert rep.sup_history[-1] <= 1e-10 or rep.roundoff_limited


@pytest.mark.parametrize("n,k", [(3, 1), (5, 2)])
def test_dirichlet_recovers_closed_form(n, k):
    field, rep = annulus_oracle_solve(n, k, 400)
    assert rep.converged
    assert oracle_error(field, exterior_ball(n, k, 1.0), n) <= 1e-4


def test_dirichlet_general_recovery():
    spec = EquationSpec(4, 2, -1.0, 3.0)
    oracle = general_radial(4, 2, -1.0, 3.0, 1.0, kind="exterior")
    field, rep = annulus_oracle_solve(4, 2, 400, spec, oracle)
    assert rep.converged and oracle_error(field, oracle, 4) <= 1e-4


def test_dirichlet_order():
    fields = [annulus_oracle_solve(4, 2, N)[0] for N in (100, 200, 400)]
    est = estimate_order(fields, 4, exterior_ball(4, 2, 1.0))
    assert 1.8 <= est.order <= 2.2
    self_est = estimate_order(fields + [annulus_oracle_solve(4, 2, 800)[0]], 4)
    assert 1.8 <= self_est.order <= 2.2


def test_estimate_order_needs_nested_meshes():
    fields = [annulus_oracle_solve(3, 1, N)[0] for N in (100, 200, 300)]
    with pytest.raises(DomainError):
        estimate_order(fields, 3)


def test_ball_dirichlet_below_upper_barrier():
    n, k = 4, 2
    mesh = build_mesh(Ball(1.0), 200)
    spec = EquationSpec(n, k)
    init = RadialField.from_profile(mesh, interior_ball(n, k, 1.5))
    field, rep = solve_dirichlet(mesh, {"hi": 2.0}, spec, FAST, init)
    assert rep.converged
    barrier = sample_profile(mesh, upper_barrier_ball(n, k, 1.0), np.arange(mesh.N), "u")
    assert np.all(field.u(n)[:-1] < barrier)


def test_general_solution_between_barriers():
    spec = EquationSpec(4, 2, -1.0, 3.0)
    mesh = build_mesh(Annulus(1.0, 2.0), 400)
    init = RadialField.from_profile(mesh, general_radial(4, 2, -1.0, 3.0, 6.0))
    field, rep = solve_dirichlet(mesh, {"lo": 0.0, "hi": 0.5}, spec, FAST, init)
    assert rep.converged
    sub = dirichlet_subsolution(spec, 1.0, 2.0, 0.0, 0.5).profile
    assert np.all(field.v >= sub.v_jet(mesh.r)[0] - 1e-12)
    upper = harmonic_upper_bound(4, 1.0, 2.0, 0.0, 0.5)
    assert np.all(field.u(4) <= upper(mesh.r) * (1 + 1e-12))


def test_dirichlet_rejects_foreign_initial_and_missing_data():
    mesh = build_mesh(Annulus(1.5, 3.0), 32)
    other = build_mesh(Annulus(1.5, 3.0), 32)
    init = RadialField.from_profile(other, interior_ball(3, 1, 6.0))
    with pytest.raises(DomainError):
        solve_dirichlet(mesh, {"lo": 0.0, "hi": 0.0}, EquationSpec(3, 1), FAST, init)
    init = RadialField.from_profile(mesh, interior_ball(3, 1, 6.0))
    with pytest.raises(DomainError):
        solve_dirichlet(mesh, {"hi": 0.0}, EquationSpec(3, 1), FAST, init)


def test_blowup_ball_small():
    field, rep = blowup_ball(3, 1, 500)
    assert rep.converged
    assert rep.monotonicity_certificates and all(c["monotone"] for c in rep.monotonicity_certificates)
    assert oracle_error(field, interior_ball(3, 1, 1.0), 3, (0.0, 0.9)) <= 5e-4
    last = rep.stages[-1]
    assert last["core_change"] < SolverConfig().blowup_tol


def test_blowup_core_order():
    fields = [blowup_ball(3, 1, N)[0] for N in (250, 500, 1000)]
    est = estimate_order(fields, 3, interior_ball(3, 1, 1.0), core=(0.0, 0.9))
    assert 1.7 <= est.order <= 2.3


def test_uniform_mesh_blowup_degrades():
    # without clustering the boundary layer is unresolved and the stages never settle
    spec = EquationSpec(3, 1)
    fields = []
    for N in (100, 200, 400):
        mesh = build_mesh(Ball(1.0), N, Uniform())
        f, rep = solve_blowup(mesh, spec, SolverConfig(), interior_ball(3, 1, 1.5), adapt_mesh=False)
        assert not rep.converged
        fields.append(f)
    assert estimate_order(fields, 3, interior_ball(3, 1, 1.0)).order < 2


def test_blowup_fixed_final_stage():
    mesh = build_mesh(Ball(1.0), 300, BoundaryClustered(("hi",), 1e-10))
    field, rep = solve_blowup(mesh, EquationSpec(4, 1), SolverConfig(), interior_ball(4, 1, 1.5), m_final=5.0)
    assert rep.converged and rep.stages[-1]["m"] >= 5.0
    assert field.v[-1] == pytest.approx(rep.stages[-1]["m"])


def test_maximal_exhaustion_small():
    res = solve_maximal(1.0, EquationSpec(3, 1), radii=(8.0, 16.0), N=800)
    assert res.report.converged and len(res.fields) == 2
    assert np.min(res.core_u[-1]) > 0.01
    exact = exterior_ball(3, 1, 1.0)(res.core_r)
    assert np.max(np.abs(res.core_u[-1] / exact - 1)) <= 1e-3
    cert = res.report.monotonicity_certificates[0]
    assert set(cert) == {"R", "max_relative_increase", "monotone_decrease"}


def test_transfer_preserves_smooth_field():
    a = build_mesh(Ball(1.0), 400, BoundaryClustered(("hi",), 1e-6))
    b = build_mesh(Ball(1.0), 400, BoundaryClustered(("hi",), 1e-8))
    prof = interior_ball(4, 2, 1.5)
    moved = transfer(RadialField.from_profile(a, prof), b)
    exact = RadialField.from_profile(b, prof).v
    assert np.max(np.abs(moved.v - exact)) <= 1e-8


def test_solver_config_validation():
    with pytest.raises(DomainError):
        SolverConfig(damping=1.5)
    with pytest.raises(DomainError):
        SolverConfig(newton_tol=0.0)
    with pytest.raises(DomainError):
        SolverConfig(merit="max")


def test_field_validation():
    mesh = build_mesh(Ball(1.0), 16)
    with pytest.raises(DomainError):
        RadialField(mesh, np.zeros(5))
    with pytest.raises(DomainError):
        RadialField(mesh, np.full(17, np.inf))


def test_solves_are_deterministic():
    a, ra = annulus_oracle_solve(5, 2, 200)
    b, rb = annulus_oracle_solve(5, 2, 200)
    assert np.array_equal(a.v, b.v)
    assert ra.to_dict() == rb.to_dict()
