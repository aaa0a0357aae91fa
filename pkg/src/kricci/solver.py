"""Damped Newton with boundary-value continuation for radial solutions.

The unknown is v = (2/(n-2)) ln u at mesh nodes.  At every free node the
discrete equation is the degree-one homogeneous form

    pure:    sigma_k^{1/k}(mu) - 1 = 0
    general: sigma_k/sigma_{k-1}(mu) + alpha - alpha0 / sigma_{k-1}(mu) = 0

with mu = (n-2) e^{-2v} lambda(calW[v]) and the radial/tangential eigenvalues
of calW built from three-point differences.  The Jacobian is tridiagonal.
"""

from __future__ import annotations

import time
from dataclasses import dataclass, field, replace

import numpy as np
from scipy.interpolate import CubicSpline
from scipy.linalg import solve_banded

from .conformal import EquationSpec, normalized_operator
from .mesh import Annulus, Ball, BoundaryClustered, RadialMesh, build_mesh
from .symfun import DomainError

EPS = np.finfo(float).eps


class ConeViolationError(RuntimeError):
    """The field is not admissible; ``node`` is the worst offender."""

    def __init__(self, message: str, node: int, margin: float):
        super().__init__(message)
        self.node = node
        self.margin = margin


class MonotonicityError(RuntimeError):
    """A continuation or exhaustion sequence broke the comparison principle."""


@dataclass
class RadialField:
    mesh: RadialMesh
    v: np.ndarray

    def __post_init__(self):
        self.v = np.asarray(self.v, dtype=float)
        if self.v.shape != self.mesh.r.shape:
            raise DomainError("field and mesh sizes differ")
        if not np.all(np.isfinite(self.v)):
            raise DomainError("field values must be finite")

    @property
    def n_nodes(self) -> int:
        return len(self.v)

    def u(self, n: int) -> np.ndarray:
        return np.exp(0.5 * (n - 2) * self.v)

    def copy(self) -> "RadialField":
        return RadialField(self.mesh, self.v.copy())

    @classmethod
    def from_profile(cls, mesh: RadialMesh, profile) -> "RadialField":
        """Sample a closed-form profile at the nodes (using exact end distances when it is ball-type)."""
        return cls(mesh, sample_profile(mesh, profile))


def sample_profile(mesh: RadialMesh, profile, nodes=None, what: str = "v") -> np.ndarray:
    """v (or u with ``what="u"``) of a profile at mesh nodes ``nodes`` (default: all).

    A ball-type profile whose singular sphere is a mesh end is evaluated
    through the stored end distances, so values next to that end keep full
    relative accuracy.
    """
    idx = np.arange(mesh.N + 1) if nodes is None else np.asarray(nodes)
    r = mesh.r[idx]
    dist = None
    kind = getattr(profile, "kind", "")
    lo, hi = mesh.domain.bounds
    if kind in ("InteriorBall", "UpperBarrier") or (kind == "GeneralRadial" and profile.params["side"] == "interior"):
        if hi == profile.params["s"]:
            dist = mesh.dist_hi[idx]
    elif kind == "ExteriorBall" or (kind == "GeneralRadial" and profile.params["side"] == "exterior"):
        if lo == profile.params["s"]:
            dist = mesh.dist_lo[idx]
    if what == "u":
        return profile(r, dist)
    return profile.v_jet(r, dist)[0]


@dataclass
class SolverConfig:
    newton_tol: float = 1e-10
    max_iters: int = 60
    damping: float = 0.5
    min_step: float = 2.0**-20
    margin_floor: float = 1e-8
    continuation_steps: int = 1
    max_halvings: int = 1
    roundoff_factor: float = 1.0
    blowup_step: float = 1.0
    blowup_tol: float = 1e-8
    blowup_max_stages: int = 80
    merit: str = "l2"

    def __post_init__(self):
        if self.merit not in ("l2", "sup"):
            raise DomainError("merit must be 'l2' or 'sup'")
        vals = (self.newton_tol, self.max_iters, self.damping, self.min_step, self.margin_floor, self.continuation_steps, self.blowup_step)
        if any(not x > 0 for x in vals) or not self.damping < 1 or self.max_halvings < 0:
            raise DomainError("solver parameters must be positive with damping < 1")

    def to_dict(self) -> dict:
        return dict(self.__dict__)


@dataclass
class SolveReport:
    converged: bool
    iterations: int
    residual_history: list
    final_margin: float
    monotonicity_certificates: list = field(default_factory=list)
    timing: float = 0.0
    message: str = ""
    stages: list = field(default_factory=list)
    roundoff_limited: bool = False
    residual_floor: float = 0.0
    sup_history: list = field(default_factory=list)

    def to_dict(self, include_timing: bool = False) -> dict:
        out = {
            "converged": self.converged,
            "iterations": self.iterations,
            "residual_history": [float(x) for x in self.residual_history],
            "sup_history": [float(x) for x in self.sup_history],
            "final_margin": float(self.final_margin),
            "monotonicity_certificates": self.monotonicity_certificates,
            "message": self.message,
            "stages": self.stages,
            "roundoff_limited": self.roundoff_limited,
            "residual_floor": float(self.residual_floor),
        }
        if include_timing:
            out["timing"] = self.timing
        return out


# ---------------------------------------------------------------------------
# assembly


@dataclass
class Assembly:
    residual: np.ndarray  # at free nodes
    banded: np.ndarray  # (3, n_free) for solve_banded((1, 1), ...)
    margin: np.ndarray  # at free nodes
    floor: np.ndarray  # roundoff estimate of each residual entry
    free: np.ndarray  # node indices of the unknowns


def free_nodes(mesh: RadialMesh) -> np.ndarray:
    start = 0 if mesh.has_center else 1
    return np.arange(start, mesh.N)


def _stencils(mesh: RadialMesh):
    hm, hp = mesh.h[:-1], mesh.h[1:]
    s = hm + hp
    cm, cp = -hp / (hm * s), hm / (hp * s)
    dm, dp = 2.0 / (hm * s), 2.0 / (hp * s)
    return cm, cp, dm, dp


def assemble(field: RadialField, spec: EquationSpec, jacobian: bool = True) -> Assembly:
    """Residual, tridiagonal Jacobian and cone margins at the free nodes."""
    mesh, v = field.mesh, field.v
    n = spec.n
    N = mesh.N
    r = mesh.r
    cm, cp, dm, dp = _stencils(mesh)
    vi = v[1:N]
    dv_m, dv_p = v[0 : N - 1] - vi, v[2 : N + 1] - vi
    v1 = cm * dv_m + cp * dv_p
    v2 = dm * dv_m + dp * dv_p
    ri = r[1:N]
    q = (n - 1) / (n - 2)
    lam_r = q * (v2 + v1 / ri)
    lam_t = v2 / (n - 2) + (2 * n - 3) / (n - 2) * v1 / ri + v1 * v1
    Lr1, Lr2 = q / ri, np.full_like(ri, q)
    Lt1, Lt2 = (2 * n - 3) / ((n - 2) * ri) + 2.0 * v1, np.full_like(ri, 1.0 / (n - 2))
    coef_m, coef_p = cm, cp
    curv_m, curv_p = dm, dp
    node_v = vi
    node_r = ri
    if mesh.has_center:
        h0 = mesh.h[0]
        c2 = 2.0 / (h0 * h0)
        v2c = c2 * (v[1] - v[0])
        lc = 2.0 * q * v2c
        lam_r = np.concatenate(([lc], lam_r))
        lam_t = np.concatenate(([lc], lam_t))
        Lr1 = np.concatenate(([0.0], Lr1))
        Lt1 = np.concatenate(([0.0], Lt1))
        Lr2 = np.concatenate(([2.0 * q], Lr2))
        Lt2 = np.concatenate(([2.0 * q], Lt2))
        coef_m = np.concatenate(([0.0], cm))
        coef_p = np.concatenate(([0.0], cp))
        curv_m = np.concatenate(([0.0], dm))
        curv_p = np.concatenate(([c2], dp))
        node_v = v[:N]
        node_r = r[:N]
    scale = (n - 2) * np.exp(-2.0 * node_v)
    mu_r, mu_t = scale * lam_r, scale * lam_t
    if spec.mode == "general":
        alpha, alpha0 = spec.coefficients(node_r)
    else:
        alpha = alpha0 = None
    g, g_r, g_t, margin = normalized_operator(mu_r, mu_t, spec, alpha, alpha0)
    free = free_nodes(mesh)
    m = len(free)
    banded = np.zeros((3, m))
    floor = np.zeros(m)
    if jacobian:
        A = scale * (g_r * Lr1 + g_t * Lt1)
        B = scale * (g_r * Lr2 + g_t * Lt2)
        explicit = -2.0 * (g_r * mu_r + g_t * mu_t)
        jm = A * coef_m + B * curv_m
        jp = A * coef_p + B * curv_p
        j0 = -(jm + jp) + explicit
        banded[1] = j0
        banded[0, 1:] = jp[:-1]
        banded[2, :-1] = jm[1:]
        vm = np.abs(v[free - 1]) if not mesh.has_center else np.concatenate(([0.0], np.abs(v[free[1:] - 1])))
        floor = 4.0 * EPS * (np.abs(jm) * vm + np.abs(j0 - explicit) * np.abs(v[free]) + np.abs(jp) * np.abs(v[free + 1]) + np.abs(g) + 1.0)
    return Assembly(g, banded, margin, floor, free)


# ---------------------------------------------------------------------------
# Newton


def _sup(x):
    return float(np.max(np.abs(x))) if len(x) else 0.0


def _merit(x, kind: str) -> float:
    return _sup(x) if kind == "sup" else float(np.linalg.norm(x))


def newton(field: RadialField, spec: EquationSpec, config: SolverConfig):
    """Damped Newton at fixed boundary values; returns (field, report).

    A step t in {1, 1/2, ...} is accepted only if every free node keeps cone
    margin >= margin_floor and the merit norm of the residual (``config.merit``)
    strictly decreases.  Convergence is judged on the sup-norm.  When no step
    is accepted, or the iteration budget runs out, the solve still counts as
    converged if the sup-norm is within the rounding floor of the discrete
    operator; the report is then flagged ``roundoff_limited``.
    ``residual_history`` holds the merit values, ``sup_history`` the sup-norms.
    """
    t0 = time.perf_counter()
    current = field.copy()
    asm = assemble(current, spec)
    if not np.all(asm.margin > 0):
        worst = int(np.argmin(np.where(np.isnan(asm.margin), -np.inf, asm.margin)))
        raise ConeViolationError("initial field is not admissible", int(asm.free[worst]), float(asm.margin[worst]))
    res = _sup(asm.residual)
    merit = _merit(asm.residual, config.merit)
    report = SolveReport(False, 0, [merit], float(np.min(asm.margin)), sup_history=[res])
    stalled = False
    for it in range(1, config.max_iters + 1):
        if res <= config.newton_tol:
            break
        step = solve_banded((1, 1), asm.banded, -asm.residual)
        t = 1.0
        accepted = False
        while t >= config.min_step:
            trial = current.v.copy()
            trial[asm.free] += t * step
            if np.all(np.isfinite(trial)):
                tf = RadialField(current.mesh, trial)
                tasm = assemble(tf, spec)
                if np.all(tasm.margin >= config.margin_floor):
                    tmerit = _merit(tasm.residual, config.merit)
                    if tmerit < merit:
                        current, asm, merit = tf, tasm, tmerit
                        accepted = True
                        break
            t *= config.damping
        report.iterations = it
        if not accepted:
            stalled = True
            break
        res = _sup(asm.residual)
        report.residual_history.append(merit)
        report.sup_history.append(res)
    if res <= config.newton_tol:
        report.converged = True
    else:
        # stagnation is acceptable only at the rounding level of the discrete operator
        floor = config.roundoff_factor * float(np.max(asm.floor))
        report.residual_floor = floor
        report.converged = report.roundoff_limited = res <= floor
        if not report.converged:
            if stalled:
                report.message = f"line search stalled at residual {res:.3e}"
            else:
                report.message = f"no convergence in {config.max_iters} iterations, residual {res:.3e}"
    report.final_margin = float(np.min(asm.margin))
    report.timing = time.perf_counter() - t0
    return current, report


# ---------------------------------------------------------------------------
# continuation solves


def _boundary_slots(mesh: RadialMesh):
    return ("hi",) if mesh.has_center else ("lo", "hi")


def _set_boundary(v, mesh, values: dict):
    out = v.copy()
    if "lo" in values and not mesh.has_center:
        out[0] = values["lo"]
    if "hi" in values:
        out[-1] = values["hi"]
    return out


def _blend_weights(mesh: RadialMesh, n: int):
    """Weights (w_lo, w_hi) of the radial harmonic r^{2-n} interpolating 1 at one end and 0 at the other.

    Written through the end distances so both weights stay smooth to full
    relative precision next to either end.
    """
    if mesh.has_center:
        return np.zeros_like(mesh.r), np.ones_like(mesh.r)
    a, b = mesh.domain.bounds
    p = 2 - n
    from_a = -np.expm1(p * np.log1p(mesh.dist_lo / a))  # 1 - (r/a)^p
    to_b = np.expm1(p * np.log1p(-mesh.dist_hi / b))  # (r/b)^p - 1
    total = -np.expm1(p * np.log(b / a))  # 1 - (b/a)^p
    w_hi = from_a / total
    w_lo = to_b * (b / a) ** p / total
    return w_lo, w_hi


def _blend(v, mesh, old: dict, new: dict, n: int):
    """Spread boundary changes into the interior along a radial harmonic, avoiding kinks."""
    w_lo, w_hi = _blend_weights(mesh, n)
    out = v.copy()
    if "hi" in new:
        out += (new["hi"] - old["hi"]) * w_hi
    if "lo" in new and not mesh.has_center:
        out += (new["lo"] - old["lo"]) * w_lo
    return _set_boundary(out, mesh, new)


def solve_dirichlet(mesh: RadialMesh, boundary: dict, spec: EquationSpec, config: SolverConfig, initial: RadialField, blend: bool = True):
    """Solve with Dirichlet data ``boundary`` ({"lo": v_a, "hi": v_b}; no "lo" on a ball).

    Boundary values move linearly from those of ``initial`` to the target in
    ``config.continuation_steps`` stages, each warm-started from the last.
    A stage whose Newton solve fails is retried with half the increment, at
    most ``config.max_halvings`` times in a row.
    """
    t0 = time.perf_counter()
    if initial.mesh is not mesh:
        raise DomainError("initial field must live on the given mesh")
    slots = _boundary_slots(mesh)
    missing = [s for s in slots if s not in boundary]
    if missing:
        raise DomainError(f"missing boundary values for {missing}")
    start = {"lo": float(initial.v[0]), "hi": float(initial.v[-1])}
    target = {s: float(boundary[s]) for s in slots}
    current = initial.copy()
    done = 0.0
    dt = 1.0 / config.continuation_steps
    halvings = 0
    iterations = 0
    history: list = []
    stages: list = []
    last = None
    while done < 1.0:
        t = min(1.0, done + dt)
        old = {s: float(current.v[0 if s == "lo" else -1]) for s in slots}
        new = {s: (1.0 - t) * start[s] + t * target[s] for s in slots}
        v_try = _blend(current.v, mesh, old, new, spec.n) if blend else _set_boundary(current.v, mesh, new)
        try:
            trial, rep = newton(RadialField(mesh, v_try), spec, config)
        except ConeViolationError as exc:
            trial, rep = None, SolveReport(False, 0, [], exc.margin, message=str(exc))
        iterations += rep.iterations
        if rep.converged:
            current, done, last = trial, t, rep
            history.extend(rep.residual_history)
            stages.append({"t": t, "iterations": rep.iterations, "residual": rep.sup_history[-1], "roundoff_limited": rep.roundoff_limited})
            halvings = 0
            continue
        if halvings < config.max_halvings:
            dt *= 0.5
            halvings += 1
            stages.append({"t": t, "rejected": True, "message": rep.message})
            continue
        report = SolveReport(False, iterations, history, rep.final_margin, stages=stages, message=f"continuation failed at t={t:.6g}: {rep.message}")
        report.timing = time.perf_counter() - t0
        return current, report
    report = SolveReport(True, iterations, history, last.final_margin if last else float("nan"), stages=stages)
    report.roundoff_limited = any(s.get("roundoff_limited", False) for s in stages)
    report.residual_floor = last.residual_floor if last else 0.0
    report.timing = time.perf_counter() - t0
    return current, report


def transfer(field: RadialField, mesh: RadialMesh) -> RadialField:
    """Move a field to another mesh of the same domain.

    Each half of the domain is interpolated by a C2 cubic spline in the
    distance to its own end, so node positions near a blow-up end stay exact.
    """
    old = field.mesh
    if old.domain != mesh.domain:
        raise DomainError("transfer needs meshes of the same domain")
    if old is mesh:
        return field.copy()
    lo, hi = mesh.domain.bounds
    L = hi - lo
    out = np.empty_like(mesh.r)
    near_lo = mesh.dist_lo <= mesh.dist_hi
    for sel_new, d_old, d_new in ((near_lo, old.dist_lo, mesh.dist_lo), (~near_lo, old.dist_hi, mesh.dist_hi)):
        if not np.any(sel_new):
            continue
        keep = d_old <= 0.75 * L
        order = np.argsort(d_old[keep])
        spline = CubicSpline(d_old[keep][order], field.v[keep][order])
        out[sel_new] = spline(d_new[sel_new])
    out[0], out[-1] = field.v[0], field.v[-1]
    return RadialField(mesh, out)


def layer_width(n: int, k: int, m: float) -> float:
    """Distance from a blow-up end at which u has dropped from its boundary value by about 2^{n/2-1}.

    For boundary value v = m the solution behaves like c0 (rho + rho_m)^{1-n/2}
    with rho_m = c0^{2/(n-2)} e^{-m}.
    """
    from .profiles import growth_constant

    return growth_constant(n, k) ** (2.0 / (n - 2)) * np.exp(-m)


def _stage_mesh(base: RadialMesh, ends, n, k, m, layer_factor, min_scale):
    grading = base.grading
    bulk = grading.bulk_fraction if isinstance(grading, BoundaryClustered) else 0.4
    lo, hi = base.domain.bounds
    scale = max(layer_factor * layer_width(n, k, m), min_scale * (hi - lo))
    return build_mesh(base.domain, base.N, BoundaryClustered(tuple(ends), scale, bulk))


def solve_blowup(
    mesh: RadialMesh,
    spec: EquationSpec,
    config: SolverConfig,
    initial,
    ends=("hi",),
    fixed: dict | None = None,
    core: tuple | None = None,
    monotone_tol: float = 1e-10,
    adapt_mesh: bool = True,
    layer_factor: float = 0.01,
    min_scale: float = 1e-14,
    m_final: float | None = None,
):
    """Blow-up solution by raising the boundary value at ``ends`` arithmetically in v.

    Stage j imposes v = m_j at each blow-up end, m_j = m_0 + j * blowup_step.
    With ``adapt_mesh`` every stage uses a mesh of ``mesh.N`` intervals
    clustered at the layer width of m_j; the previous stage is transferred
    and re-solved on that mesh so consecutive stages are compared nodewise on
    identical nodes.  The run stops when u on the comparison ``core`` (an
    r-interval) changes relatively by less than ``config.blowup_tol``, or
    after the stage reaching ``m_final``.  A stage that fails to dominate its
    predecessor raises MonotonicityError.

    ``initial`` is a RadialField or a closed-form profile; a profile is
    sampled directly on the first stage mesh, which avoids carrying rounding
    noise from a finer mesh.
    """
    t0 = time.perf_counter()
    if not isinstance(initial, RadialField):
        initial = RadialField.from_profile(_stage_mesh(mesh, ends, spec.n, spec.k, 0.0, layer_factor, min_scale) if adapt_mesh else mesh, initial)
    fixed = dict(fixed or {})
    slots = _boundary_slots(mesh)
    for s in slots:
        if s not in ends and s not in fixed:
            fixed[s] = float(initial.v[0 if s == "lo" else -1])
    lo, hi = mesh.domain.bounds
    if core is None:
        core = (lo + 0.1 * (hi - lo), hi - 0.1 * (hi - lo)) if not mesh.has_center else (0.0, 0.9 * hi)
    n, k = spec.n, spec.k
    m0 = float(np.ceil(max(float(initial.v[0 if e == "lo" else -1]) for e in ends)))
    current = initial
    stages: list = []
    certs: list = []
    history: list = []
    iterations = 0
    converged = False
    message = ""
    last = None
    prev_target = None
    for j in range(config.blowup_max_stages):
        m = m0 + j * config.blowup_step
        target = dict(fixed)
        for e in ends:
            target[e] = m
        stage_mesh = _stage_mesh(mesh, ends, n, k, m, layer_factor, min_scale) if adapt_mesh else current.mesh
        start = transfer(current, stage_mesh)
        reference = None
        if prev_target is not None:
            if stage_mesh is not current.mesh:
                reference, rep0 = newton(start, spec, config)
                iterations += rep0.iterations
                if not rep0.converged:
                    message = f"stage {j}: re-solve of the previous stage on the refined mesh failed: {rep0.message}"
                    break
            else:
                reference = current
            start = reference
        # stage 0 moves from the initial data by blending; later stages only raise end values
        nxt, rep = solve_dirichlet(stage_mesh, target, spec, config, start, blend=reference is None)
        iterations += rep.iterations
        history.extend(rep.residual_history)
        if not rep.converged:
            message = f"stage {j} (m={m:.6g}) failed: {rep.message}"
            break
        last = rep
        change = np.inf
        if reference is not None:
            drop = float(np.max(reference.v - nxt.v))
            ok = drop <= monotone_tol * (1.0 + float(np.max(np.abs(reference.v))))
            certs.append({"stage": j, "m": m, "min_increase": -drop, "monotone": bool(ok)})
            if not ok:
                raise MonotonicityError(f"stage {j} decreased the solution by {drop:.3e}")
            in_core = (stage_mesh.r >= core[0]) & (stage_mesh.r <= core[1])
            change = float(np.max(np.abs(np.expm1(0.5 * (n - 2) * (nxt.v[in_core] - reference.v[in_core])))))
        stages.append({"stage": j, "m": m, "iterations": rep.iterations, "core_change": change, "rho_scale": stage_mesh.grading.rho_scale if isinstance(stage_mesh.grading, BoundaryClustered) else None})
        current, prev_target = nxt, target
        if m_final is not None:
            if m >= m_final:
                converged = True
                break
        elif change < config.blowup_tol:
            converged = True
            break
    else:
        message = f"core did not settle within {config.blowup_max_stages} stages"
    report = SolveReport(converged, iterations, history, last.final_margin if last else float("nan"), certs, stages=stages, message=message)
    report.roundoff_limited = bool(last and last.roundoff_limited)
    report.residual_floor = last.residual_floor if last else 0.0
    report.timing = time.perf_counter() - t0
    return current, report


def blowup_ball(n: int, k: int, N: int, config: SolverConfig | None = None, R: float = 1.0, rho_scale: float = 1e-10, spec: EquationSpec | None = None):
    """Blow-up solve on Ball{R}, initialised from the closed form on a larger ball."""
    from .profiles import general_radial, interior_ball

    config = config or SolverConfig()
    spec = spec or EquationSpec(n, k)
    mesh = build_mesh(Ball(R), N, BoundaryClustered(("hi",), rho_scale * R, 0.4))
    if spec.mode == "pure":
        init = interior_ball(n, k, 1.5 * R)
    else:
        init = general_radial(n, k, float(spec.alpha), float(spec.alpha0), 1.5 * R)
    return solve_blowup(mesh, spec, config, init, ends=("hi",), core=(0.0, 0.9 * R))


def _core_u(field: RadialField, n: int, r):
    """ln u interpolated at radii ``r`` by a cubic spline through the nodes."""
    spline = CubicSpline(field.mesh.r, 0.5 * (n - 2) * field.v)
    return np.exp(spline(r))


@dataclass
class MaximalResult:
    fields: list
    radii: list
    core_r: np.ndarray
    core_u: list
    report: SolveReport
    cauchy_gap: float
    extrapolated: np.ndarray
    decay_exponent: float


def solve_maximal(
    s: float,
    spec: EquationSpec,
    config: SolverConfig | None = None,
    radii=(8.0, 16.0, 32.0, 64.0),
    N: int = 3000,
    core=(1.1, 5.0),
    outer: str = "closed_form",
    rho_scale: float = 1e-10,
    monotone_tol: float = 1e-10,
):
    """Exhaust the exterior of B_s by annuli {s < r < R_j}.

    ``outer="blowup"`` blows up at both ends of each annulus, so the
    solutions decrease in j toward the maximal solution.  ``outer="closed_form"``
    instead imposes the exterior-ball value at R_j (pure mode only).
    ``core`` is given in units of ``s``.  Monotone decrease on the core is
    certified per annulus in the report; a violation is recorded there and in
    ``report.message`` but does not mark the solves as failed.
    """
    from .profiles import exterior_ball, general_radial, interior_ball

    t0 = time.perf_counter()
    config = config or SolverConfig()
    n, k = spec.n, spec.k
    radii = [float(R) * s for R in radii]
    core_r = np.linspace(core[0] * s, core[1] * s, 200)
    if radii[0] <= core_r[-1]:
        raise DomainError("the first exhausting radius must exceed the comparison core")
    fields, core_u, certs, stages = [], [], [], []
    iterations = 0
    converged = True
    message = ""
    for j, R in enumerate(radii):
        ends = ("lo", "hi") if outer == "blowup" else ("lo",)
        mesh = build_mesh(Annulus(s, R), N, BoundaryClustered(ends, rho_scale * s, 0.4))
        if outer == "closed_form":
            init = exterior_ball(n, k, 0.97 * s) if spec.mode == "pure" else None
        elif spec.mode == "pure":
            init = interior_ball(n, k, 2.0 * R)
        else:
            init = general_radial(n, k, float(spec.alpha), float(spec.alpha0), 2.0 * R)
        fixed = None
        if outer == "closed_form":
            if spec.mode != "pure":
                raise DomainError("closed-form outer data needs the pure equation")
            fixed = {"hi": float(exterior_ball(n, k, s).v_jet(R)[0])}
        elif outer != "blowup":
            raise DomainError("outer must be 'blowup' or 'closed_form'")
        # far from B_s the operator is a near-cancellation, so continuation may need small steps
        stage_config = replace(config, max_halvings=max(config.max_halvings, 6))
        fld, rep = solve_blowup(mesh, spec, stage_config, init, ends=ends, fixed=fixed, core=(core_r[0], core_r[-1]))
        iterations += rep.iterations
        stages.append({"R": R, "converged": rep.converged, "stages": len(rep.stages), "message": rep.message})
        if not rep.converged:
            converged = False
            message = f"annulus R={R:g}: {rep.message}"
            break
        fields.append(fld)
        cu = _core_u(fld, n, core_r)
        if core_u:
            rise = float(np.max(cu / core_u[-1] - 1.0))
            ok = rise <= monotone_tol
            certs.append({"R": R, "max_relative_increase": rise, "monotone_decrease": bool(ok)})
            if not ok and not message:
                message = f"exhaustion increased at R={R:g} by a relative {rise:.3e}"
        core_u.append(cu)
    gap = float(np.max(np.abs(core_u[-1] / core_u[-2] - 1.0))) if len(core_u) >= 2 else float("nan")
    extrap, p = (core_u[-1] if core_u else np.array([]), float("nan"))
    if len(core_u) >= 3 and len(set(np.diff(np.log(radii[: len(core_u)])).round(12))) == 1:
        d1 = core_u[-2] - core_u[-3]
        d2 = core_u[-1] - core_u[-2]
        with np.errstate(divide="ignore", invalid="ignore"):
            ratio = np.median(d2 / d1)
        if 0 < ratio < 1:
            extrap = core_u[-1] + d2 * ratio / (1.0 - ratio)
            p = float(-np.log(ratio) / np.log(radii[1] / radii[0]))
    report = SolveReport(converged, iterations, [], float("nan"), certs, stages=stages, message=message)
    report.timing = time.perf_counter() - t0
    return MaximalResult(fields, radii[: len(fields)], core_r, core_u, report, gap, extrap, p)


# ---------------------------------------------------------------------------
# convergence order


@dataclass
class OrderEstimate:
    order: float
    orders: list
    errors: list


def estimate_order(fields, n: int, oracle=None, core=None) -> OrderEstimate:
    """Richardson order from solves on nested meshes (N, 2N, 4N, ...).

    With an ``oracle`` profile the sup relative error of u at the nodes of
    each solve is used; otherwise successive differences on the coarse
    nodes (self-convergence).  ``core`` restricts the comparison to an r-interval.
    """
    if len(fields) < 3:
        raise DomainError("need at least three nested solves")
    for a, b in zip(fields, fields[1:]):
        if b.mesh.N != 2 * a.mesh.N:
            raise DomainError("solves must be on meshes with N, 2N, 4N intervals")

    def mask(f):
        if core is None:
            return np.ones_like(f.mesh.r, dtype=bool)
        return (f.mesh.r >= core[0]) & (f.mesh.r <= core[1])

    errors = []
    if oracle is not None:
        errors = [oracle_error(f, oracle, n, core) for f in fields]
    else:
        base = fields[0]
        sel = mask(base)
        for a, b in zip(fields, fields[1:]):
            stride = b.mesh.N // base.mesh.N
            ua = a.u(n)[:: a.mesh.N // base.mesh.N]
            ub = b.u(n)[::stride]
            errors.append(float(np.max(np.abs(ub[sel] / ua[sel] - 1.0))))
    orders = [float(np.log2(e0 / e1)) for e0, e1 in zip(errors, errors[1:])]
    return OrderEstimate(orders[-1], orders, errors)


def oracle_error(field: RadialField, oracle, n: int, core=None) -> float:
    """Sup relative error of u against a closed form at the interior nodes (and the centre).

    Boundary nodes are skipped because a blow-up oracle is singular there.
    ``core`` restricts the comparison to an r-interval.
    """
    mesh = field.mesh
    sel = np.zeros(mesh.N + 1, dtype=bool)
    sel[1:-1] = True
    sel[0] = mesh.has_center
    if core is not None:
        sel &= (mesh.r >= core[0]) & (mesh.r <= core[1])
    idx = np.flatnonzero(sel)
    exact = sample_profile(mesh, oracle, idx, "u")
    return float(np.max(np.abs(field.u(n)[idx] / exact - 1.0)))


def replace_config(config: SolverConfig, **changes) -> SolverConfig:
    return replace(config, **changes)
