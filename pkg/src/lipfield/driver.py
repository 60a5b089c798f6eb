"""Quasi-static driving of the bar: load programs, alternate minimization,
localization trigger, snap-back control and derived measurements.

Each load step minimizes the incremental energy by alternating between the
frozen-damage equilibrium solve and the constrained damage update until the
damage field settles (max elementwise change below ``alt_tol``). The energy
is non-increasing across the half-steps. Because the homogeneous problem has
many minimizers, the starting guess of every step raises the damage of the
middle element by a small ``trigger_delta`` — a guess only, never written
into the converged history.

After the stopping criterion fires, a short uncounted tail of extra
alternations (to ``tighten_tol``) plus one final equilibrium solve make the
returned state self-consistent at the final damage field, so per-point
optimality audits hold at much tighter tolerances than ``alt_tol``.

Snap-back is handled by controlling the largest element strain increment:
an outer scalar iteration (bracketing plus regula falsi) finds the end
displacement, which may decrease, that produces the requested increment.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .damage_update import DamageProblem, solve_damage
from .equilibrium import BarState, equilibrium_solve, initial_state
from .errors import ControlFailureError, NonConvergenceError
from .materials import D_MAX, MaterialModel
from .mesh import Mesh1D


@dataclass(frozen=True)
class ImposedDisplacement:
    """Piecewise-linear end-displacement history through ``peaks``."""

    peaks: tuple
    steps_per_segment: int = 50
    body_force_amplitude: float = 0.0

    def __post_init__(self):
        if len(self.peaks) < 2:
            raise ValueError("need at least two displacement peaks")
        if self.steps_per_segment < 1:
            raise ValueError("steps_per_segment must be >= 1")

    def targets(self):
        out = []
        for a, b in zip(self.peaks[:-1], self.peaks[1:]):
            seg = np.linspace(a, b, self.steps_per_segment + 1)[1:]
            out.extend(float(v) for v in seg)
        return out


@dataclass(frozen=True)
class SnapBackControl:
    """Limit the largest element strain increment per step instead of
    imposing the end displacement directly."""

    delta_eps_max: float
    max_steps: int = 400
    stop_stress_fraction: float = 0.01
    body_force_amplitude: float = 0.0

    def __post_init__(self):
        if self.delta_eps_max <= 0.0:
            raise ValueError("delta_eps_max must be positive")


LoadProgram = ImposedDisplacement | SnapBackControl


@dataclass(frozen=True)
class SolverParams:
    alt_tol: float = 1e-6
    alt_cap: int = 500
    newton_tol: float | None = None
    newton_cap: int = 100
    feas_tol: float = 1e-8
    kkt_tol: float = 1e-6
    dual_cap: int = 10_000
    trigger_delta: float = 1e-3
    trigger: bool = True
    tighten_tol: float = 1e-9
    tighten_cap: int = 25
    snapback_rel_tol: float = 0.02
    snapback_cap: int = 40
    audit_kkt: bool = True


@dataclass(frozen=True)
class StepRecord:
    step: int
    u_d: float
    mean_strain: float
    mean_stress: float
    alt_iters: int
    free_elements: int
    work_increment: float
    kkt_violation: float = 0.0


@dataclass
class ScenarioResult:
    records: list
    profiles: dict  # step -> dict of per-element arrays
    mesh: Mesh1D
    model: MaterialModel
    l: float | None
    final_state: BarState | None = None

    def curve(self, column):
        return np.array([getattr(r, column) for r in self.records])


def apply_trigger(d_guess: np.ndarray, delta: float) -> np.ndarray:
    """Raise the middle element of a starting guess by ``delta``.

    Breaks the translational symmetry of the homogeneous minimizer set; the
    result is only ever used as the first alternate-minimization iterate.
    """
    if not 0.0 < delta < 1.0:
        raise ValueError("trigger amplitude must lie in (0, 1)")
    out = np.array(d_guess, dtype=float, copy=True)
    mid = out.size // 2
    out[mid] = min(out[mid] + delta, D_MAX)
    return out


def _alternate(equil, damage, d_n, d_guess, params):
    """Shared alternation engine: equilibrium/damage until the damage field
    settles, then an uncounted consistency tail. Returns
    (final equil context, final damage solution, alternation count)."""
    d_prev = np.asarray(d_n, dtype=float)
    d_curr = np.asarray(d_guess, dtype=float)
    alt_iters = 0
    converged = False
    sol = None
    while alt_iters < params.alt_cap:
        ctx = equil(d_curr)
        sol = damage(ctx)
        alt_iters += 1
        delta = float(np.max(np.abs(sol.d - d_prev)))
        d_prev = sol.d
        d_curr = sol.d
        if delta <= params.alt_tol:
            converged = True
            break
    if not converged:
        raise NonConvergenceError(
            f"alternate minimization exceeded {params.alt_cap} iterations",
            iterations=alt_iters,
            best=d_curr,
        )
    for _ in range(params.tighten_cap):
        ctx = equil(d_curr)
        sol = damage(ctx)
        delta = float(np.max(np.abs(sol.d - d_curr)))
        d_curr = sol.d
        if delta <= params.tighten_tol:
            break
    ctx = equil(d_curr)
    return ctx, sol, alt_iters


def run_step(
    mesh: Mesh1D,
    model: MaterialModel,
    state_n: BarState,
    u_d: float,
    l: float | None,
    params: SolverParams = SolverParams(),
    body_force=None,
):
    """One load step from a converged state to the end displacement ``u_d``.

    Returns the new converged BarState plus diagnostics (alternations, free
    element count, damage-solver residual, per-element constraint forces).
    """
    d_guess = (
        apply_trigger(state_n.d, params.trigger_delta)
        if params.trigger
        else state_n.d
    )
    warm = {"u": state_n.u}

    def equil(d):
        bar = equilibrium_solve(
            mesh,
            model,
            warm["u"],
            state_n.eps_p,
            state_n.p,
            d,
            u_d,
            body_force=body_force,
            tol=params.newton_tol,
            max_iter=params.newton_cap,
        )
        warm["u"] = bar.u
        return bar

    dual_warm = {}

    def damage(bar):
        problem = DamageProblem(
            mesh=mesh,
            model=model,
            eps=bar.eps,
            eps_p=bar.eps_p,
            p=bar.p,
            d_n=state_n.d,
            l=l,
        )
        sol = solve_damage(
            problem,
            feas_tol=params.feas_tol,
            kkt_tol=params.kkt_tol,
            max_dual_iter=params.dual_cap,
            dual_warm=dual_warm.copy(),
        )
        dual_warm.clear()
        dual_warm.update(sol.dual_state)
        return sol

    bar, sol, alt_iters = _alternate(equil, damage, state_n.d, d_guess, params)

    kkt_violation = 0.0
    if params.audit_kkt:
        kkt_violation = audit_step(model, bar, state_n, sol.lip_force)

    diagnostics = {
        "alt_iters": alt_iters,
        "free_elements": sol.free_count,
        "damage_kkt_residual": sol.kkt_residual,
        "lip_force": sol.lip_force,
        "kkt_violation": kkt_violation,
    }
    return bar, diagnostics


def audit_step(model, bar: BarState, state_n: BarState, lip_force) -> float:
    """Worst pointwise optimality violation over all elements of a step.

    Vectorized form of :func:`lipfield.materials.kkt_check` applied per
    element with the damage-solver constraint forces; the equivalence is
    covered by tests.
    """
    d, d_n = bar.d, state_n.d
    mu_eff = np.asarray(
        model.mu(bar.eps, bar.eps_p, bar.p, d), dtype=float
    ) + np.asarray(lip_force, dtype=float)
    lam1 = np.maximum(mu_eff, 0.0)
    lam2 = np.maximum(-mu_eff, 0.0)
    worst = max(
        np.max(d_n - d, initial=0.0),
        np.max(d - 1.0, initial=0.0),
        np.max(np.abs(lam1 * (d - d_n)), initial=0.0),
        np.max(np.abs(lam2 * (1.0 - d)), initial=0.0),
    )
    if model.has_plasticity:
        R = np.asarray(model.yield_R(bar.p, d), dtype=float)
        sigma = np.asarray(model.stress(bar.eps, bar.eps_p, bar.p, d), dtype=float)
        dep = bar.eps_p - state_n.eps_p
        dp = bar.p - state_n.p
        gap = dp - np.abs(dep)
        flowing = np.abs(dep) > 1e-9
        stat = np.where(
            flowing,
            np.abs(sigma - R * np.sign(dep)),
            np.maximum(np.abs(sigma) - R, 0.0),
        )
        worst = max(
            worst,
            np.max(-gap, initial=0.0),
            np.max(np.abs(R * gap), initial=0.0),
            np.max(stat, initial=0.0),
        )
    return float(worst)


def run_snapback(
    mesh: Mesh1D,
    model: MaterialModel,
    state_n: BarState,
    delta_eps_max: float,
    l: float | None,
    params: SolverParams = SolverParams(),
    body_force=None,
    u_d_increment_guess: float | None = None,
):
    """Find the end displacement whose step produces the requested largest
    element strain increment, then return that step's result.

    The outer scalar solve brackets the target and switches to regula falsi;
    ``u_d`` is free to decrease below its previous value (snap-back).
    """
    target = delta_eps_max
    rel_tol = params.snapback_rel_tol

    cache = {}

    def evaluate(u_d):
        u_d = float(u_d)
        if u_d not in cache:
            bar, diag = run_step(mesh, model, state_n, u_d, l, params, body_force)
            g = float(np.max(np.abs(bar.eps - state_n.eps)))
            cache[u_d] = (bar, diag, g)
        return cache[u_d]

    du0 = u_d_increment_guess if u_d_increment_guess else delta_eps_max * mesh.L
    du0 = abs(du0)
    if du0 <= 0.0:
        du0 = delta_eps_max * mesh.L

    lo_pt = None  # (u_d, g) with g < target
    hi_pt = None  # (u_d, g) with g > target
    u_try = state_n.u_d + du0
    evals = 0
    while evals < params.snapback_cap:
        bar, diag, g = evaluate(u_try)
        evals += 1
        if abs(g - target) <= rel_tol * target:
            return bar, diag, u_try
        if g < target:
            lo_pt = (u_try, g)
        else:
            hi_pt = (u_try, g)
        if lo_pt is not None and hi_pt is not None:
            # regula falsi on the bracket, safeguarded by bisection
            (ua, ga), (ub, gb) = lo_pt, hi_pt
            denom = gb - ga
            u_next = ua + (target - ga) / denom * (ub - ua) if denom != 0 else 0.5 * (ua + ub)
            width = abs(ub - ua)
            lo_u, hi_u = min(ua, ub), max(ua, ub)
            if not (lo_u + 1e-3 * width < u_next < hi_u - 1e-3 * width):
                u_next = 0.5 * (ua + ub)
            u_try = u_next
        elif hi_pt is None:
            # increment too small: push the displacement further out
            du0 *= 2.0
            u_try = u_try + du0
        else:
            # overshoot even at the first probe: walk back, past u_d_n if needed
            du0 *= 2.0
            u_try = u_try - du0
    raise ControlFailureError(
        f"snap-back control failed to reach the target increment in "
        f"{params.snapback_cap} evaluations",
        iterations=evals,
    )


def dissipated_energy(records) -> float:
    """External work along the recorded path: L * integral of the mean
    stress over the mean strain (signed trapezoids). Equals the dissipation
    once the bar is fully unloaded/broken."""
    if len(records) < 2:
        return 0.0
    work = 0.0
    for prev, cur in zip(records[:-1], records[1:]):
        work += (
            0.5
            * (cur.mean_stress + prev.mean_stress)
            * (cur.mean_strain - prev.mean_strain)
        )
    # mean_strain = u_d / L, so the bar-level work carries a factor L
    return work * _records_length(records)


def _records_length(records):
    # mean_strain is u_d/L; recover L from any record with u_d != 0
    for r in records:
        if r.mean_strain != 0.0:
            return r.u_d / r.mean_strain
    return 1.0


@dataclass(frozen=True)
class Scenario:
    """Declarative description of one bar experiment."""

    mesh: Mesh1D
    model: MaterialModel
    l: float | None
    load: LoadProgram
    params: SolverParams = SolverParams()
    snapshot_steps: tuple = ()
    snapshot_all: bool = False


def _body_force_array(mesh: Mesh1D, amplitude: float):
    if amplitude == 0.0:
        return None
    x = mesh.centroid_positions
    return amplitude * np.sin(8.0 * np.pi * x / mesh.L)


def _profile(bar: BarState, mesh: Mesh1D):
    return {
        "x": mesh.centroid_positions.copy(),
        "strain": bar.eps.copy(),
        "eps_p": bar.eps_p.copy(),
        "p": bar.p.copy(),
        "d": bar.d.copy(),
    }


def run_scenario(scenario: Scenario) -> ScenarioResult:
    """Run a full load program; deterministic for a fixed scenario."""
    mesh, model = scenario.mesh, scenario.model
    body = _body_force_array(mesh, scenario.load.body_force_amplitude)
    state = initial_state(mesh, body)
    records = [
        StepRecord(step=0, u_d=0.0, mean_strain=0.0, mean_stress=0.0,
                   alt_iters=0, free_elements=0, work_increment=0.0)
    ]
    profiles = {}
    snap_steps = set(int(s) for s in scenario.snapshot_steps)
    if 0 in snap_steps or scenario.snapshot_all:
        profiles[0] = _profile(state, mesh)

    def record_step(step, bar, diag, prev_record):
        mean_strain = bar.u_d / mesh.L
        mean_stress = bar.mean_stress
        work = 0.5 * (mean_stress + prev_record.mean_stress) * (
            mean_strain - prev_record.mean_strain) * mesh.L
        rec = StepRecord(
            step=step,
            u_d=bar.u_d,
            mean_strain=mean_strain,
            mean_stress=mean_stress,
            alt_iters=diag["alt_iters"],
            free_elements=diag["free_elements"],
            work_increment=work,
            kkt_violation=diag["kkt_violation"],
        )
        records.append(rec)
        if step in snap_steps or scenario.snapshot_all:
            profiles[step] = _profile(bar, mesh)
        return rec

    try:
        if isinstance(scenario.load, ImposedDisplacement):
            prev = records[0]
            for step, u_d in enumerate(scenario.load.targets(), start=1):
                bar, diag = run_step(mesh, model, state, u_d, scenario.l,
                                     scenario.params, body)
                prev = record_step(step, bar, diag, prev)
                state = bar
        else:
            prev = records[0]
            peak = 0.0
            du_guess = None
            for step in range(1, scenario.load.max_steps + 1):
                bar, diag, u_d = run_snapback(
                    mesh, model, state, scenario.load.delta_eps_max,
                    scenario.l, scenario.params, body,
                    u_d_increment_guess=du_guess,
                )
                du_guess = u_d - state.u_d
                prev = record_step(step, bar, diag, prev)
                state = bar
                peak = max(peak, prev.mean_stress)
                if (
                    step > 2
                    and prev.mean_stress
                    <= scenario.load.stop_stress_fraction * peak
                ):
                    break
    except NonConvergenceError as exc:
        exc.history = [r.step for r in records[-3:]]
        raise
    finally:
        last_step = records[-1].step
        if last_step not in profiles:
            profiles[last_step] = _profile(state, mesh)

    return ScenarioResult(
        records=records,
        profiles=profiles,
        mesh=mesh,
        model=model,
        l=scenario.l,
        final_state=state,
    )


# ---------------------------------------------------------------------------
# Pointwise (homogeneous) driver
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class PointRecord:
    eps: float
    sigma: float
    d: float
    eps_p: float
    p: float


def resolve_strain_history(model, peaks, substeps):
    """Expand strain peaks into substep targets; the token ``"e"`` means
    "unload to zero stress", resolved from the state reached at that point.

    Returns the list of strain targets; resolution of the unload points uses
    the elastic unloading slope, which is exact for these models.
    """
    # handled lazily inside pointwise_run; here only validate
    for v in peaks:
        if not (isinstance(v, (int, float)) or v == "e"):
            raise ValueError(f"invalid strain peak {v!r}")
    if substeps < 1:
        raise ValueError("substeps must be >= 1")
    return list(peaks)


def pointwise_run(
    model: MaterialModel,
    peaks,
    substeps: int = 100,
    params: SolverParams = SolverParams(),
):
    """Drive a single material point through a piecewise-linear strain
    history; semantically an N = 1 bar of unit length."""
    resolve_strain_history(model, peaks, substeps)
    records = [PointRecord(eps=0.0, sigma=0.0, d=0.0, eps_p=0.0, p=0.0)]
    eps_n, eps_p_n, p_n, d_n = 0.0, 0.0, 0.0, 0.0
    eps_cur = float(peaks[0]) if peaks[0] != "e" else 0.0

    def solve_point(eps, eps_p_prev, p_prev, d_prev):
        def equil(d):
            return model.return_map_arrays(
                np.asarray([eps]), np.asarray([eps_p_prev]),
                np.asarray([p_prev]), np.asarray(d))

        class _Sol:
            __slots__ = ("d",)

        def damage(ctx):
            eps_p_c, p_c, _, _, _ = ctx
            sol = _Sol()
            sol.d = np.asarray(model.damage_argmin(
                np.asarray([eps]), eps_p_c, p_c,
                np.asarray([min(d_prev, D_MAX)]), D_MAX))
            return sol

        ctx, sol, _ = _alternate(
            equil, damage, np.asarray([d_prev]), np.asarray([d_prev]), params)
        eps_p_c, p_c, sigma_c, _, _ = ctx
        return float(eps_p_c[0]), float(p_c[0]), float(sigma_c[0]), float(sol.d[0])

    for peak in peaks[1:]:
        if peak == "e":
            modulus = float(model.elastic_modulus(np.asarray(d_n)))
            sigma_now = records[-1].sigma
            target = eps_cur - sigma_now / modulus
        else:
            target = float(peak)
        for eps in np.linspace(eps_cur, target, substeps + 1)[1:]:
            eps = float(eps)
            eps_p_n, p_n, sigma, d_n = solve_point(eps, eps_p_n, p_n, d_n)
            records.append(
                PointRecord(eps=eps, sigma=sigma, d=d_n, eps_p=eps_p_n, p=p_n))
        eps_cur = target
    return records
