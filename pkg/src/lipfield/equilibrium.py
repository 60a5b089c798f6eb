"""Global equilibrium at frozen damage: Newton on the tridiagonal tangent.

One Newton sweep computes the element stresses and algorithmic tangents from
the return mapping, assembles the symmetric tridiagonal stiffness T_i/h and
the out-of-balance force, eliminates the two Dirichlet rows and solves for
the displacement correction. A bisection line search on the incremental
potential guards the rare steps where the raw correction would increase the
energy. The frozen-damage problem is convex, so the converged state does not
depend on the starting guess.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.linalg import solve_banded

from .errors import NonConvergenceError, SingularSystemError
from .materials import MaterialModel
from .mesh import Mesh1D

RESIDUAL_RTOL = 1e-9  # equilibrium residual, relative to max(1, |sigma|max)
SOLVE_RTOL = 1e-12  # linear-solve residual check


@dataclass(frozen=True)
class TridiagonalSystem:
    """Symmetric tridiagonal system; sub/main/super have length N+1 with
    the unused end entries kept at zero (sub[0], super[N])."""

    sub: np.ndarray
    main: np.ndarray
    super: np.ndarray
    rhs: np.ndarray


@dataclass
class BarState:
    """Converged bar solution at one load level."""

    u: np.ndarray
    eps: np.ndarray
    eps_p: np.ndarray
    p: np.ndarray
    d: np.ndarray
    sigma: np.ndarray
    T: np.ndarray
    u_d: float
    body_force: np.ndarray | None = None
    iterations: int = 0
    residual_norm: float = 0.0
    energy_history: list = field(default_factory=list, repr=False)

    @property
    def mean_stress(self) -> float:
        return float(np.mean(self.sigma))


def initial_state(mesh: Mesh1D, body_force=None) -> BarState:
    n = mesh.N
    return BarState(
        u=np.zeros(n + 1),
        eps=np.zeros(n),
        eps_p=np.zeros(n),
        p=np.zeros(n),
        d=np.zeros(n),
        sigma=np.zeros(n),
        T=np.zeros(n),
        u_d=0.0,
        body_force=body_force,
    )


def external_load(mesh: Mesh1D, body_force) -> np.ndarray:
    """Consistent nodal load of a per-element volumic force: f_i*h/2 to each
    end node of element i."""
    f = np.zeros(mesh.N + 1)
    if body_force is not None:
        half = np.asarray(body_force, dtype=float) * mesh.h / 2.0
        f[:-1] += half
        f[1:] += half
    return f


def assemble(
    mesh: Mesh1D,
    model: MaterialModel,
    u: np.ndarray,
    eps_p_n: np.ndarray,
    p_n: np.ndarray,
    d: np.ndarray,
    body_force=None,
):
    """Tridiagonal tangent system and the local return-map results at ``u``.

    The rhs is the out-of-balance force (external minus internal) with the
    Dirichlet rows eliminated symmetrically; solving it yields a correction
    with zero end values.
    """
    n = mesh.N
    h = mesh.h
    eps = np.diff(u) / h
    eps_p, p, sigma, T, plastic = model.return_map_arrays(eps, eps_p_n, p_n, d)

    f_int = np.zeros(n + 1)
    f_int[:-1] -= sigma
    f_int[1:] += sigma
    rhs = external_load(mesh, body_force) - f_int

    k = T / h
    main = np.zeros(n + 1)
    sub = np.zeros(n + 1)
    sup = np.zeros(n + 1)
    main[:-1] += k
    main[1:] += k
    sup[:-1] = -k
    sub[1:] = -k

    # Dirichlet elimination at both ends (corrections vanish there)
    main[0] = 1.0
    sup[0] = 0.0
    sub[1] = 0.0
    main[n] = 1.0
    sub[n] = 0.0
    sup[n - 1] = 0.0
    rhs[0] = 0.0
    rhs[n] = 0.0

    system = TridiagonalSystem(sub=sub, main=main, super=sup, rhs=rhs)
    locals_ = dict(eps=eps, eps_p=eps_p, p=p, sigma=sigma, T=T, plastic=plastic)
    return system, locals_


def solve_tridiagonal(system: TridiagonalSystem) -> np.ndarray:
    """Direct solution of the tridiagonal system, with a residual check."""
    ab = np.vstack(
        (np.roll(system.super, 1), system.main, np.roll(system.sub, -1))
    )
    try:
        x = solve_banded((1, 1), ab, system.rhs)
    except np.linalg.LinAlgError as exc:
        raise SingularSystemError(f"tridiagonal solve failed: {exc}") from exc
    if not np.all(np.isfinite(x)):
        raise SingularSystemError("tridiagonal solve produced non-finite values")
    resid = _apply_tridiagonal(system, x) - system.rhs
    b_norm = float(np.max(np.abs(system.rhs)))
    if b_norm > 0.0 and float(np.max(np.abs(resid))) > SOLVE_RTOL * b_norm:
        raise SingularSystemError(
            f"linear solve residual {np.max(np.abs(resid)):.3e} exceeds "
            f"{SOLVE_RTOL:.0e} * ||b||"
        )
    return x


def _apply_tridiagonal(system: TridiagonalSystem, x: np.ndarray) -> np.ndarray:
    y = system.main * x
    y[:-1] += system.super[:-1] * x[1:]
    y[1:] += system.sub[1:] * x[:-1]
    return y


def total_potential(
    mesh: Mesh1D,
    model: MaterialModel,
    u: np.ndarray,
    eps_p_n: np.ndarray,
    p_n: np.ndarray,
    d: np.ndarray,
    f_ext: np.ndarray,
) -> float:
    """Incremental potential with internals minimized at the given strains."""
    eps = np.diff(u) / mesh.h
    eps_p, p, _, _, _ = model.return_map_arrays(eps, eps_p_n, p_n, d)
    energy = mesh.h * float(np.sum(model.potential(eps, eps_p, p, d)))
    return energy - float(np.dot(f_ext, u))


def equilibrium_solve(
    mesh: Mesh1D,
    model: MaterialModel,
    u_start: np.ndarray | None,
    eps_p_n: np.ndarray,
    p_n: np.ndarray,
    d: np.ndarray,
    u_d: float,
    body_force=None,
    tol: float | None = None,
    max_iter: int = 100,
) -> BarState:
    """Newton solve of the frozen-damage equilibrium under an imposed end
    displacement. Pure softening elasticity converges in one iteration."""
    n = mesh.N
    if tol is None:
        tol = 1e-10 * max(mesh.L, abs(u_d))
    if u_start is None:
        u = u_d * mesh.node_positions / mesh.L
    else:
        u = np.array(u_start, dtype=float, copy=True)
    u[0] = 0.0
    u[n] = u_d

    f_ext = external_load(mesh, body_force)
    d = np.asarray(d, dtype=float)
    energy_history = []
    residual_history = []
    iterations = 0
    for _ in range(max_iter + 1):
        system, loc = assemble(mesh, model, u, eps_p_n, p_n, d, body_force)
        res_norm = float(np.max(np.abs(system.rhs)))
        residual_history.append(res_norm)
        sigma_scale = max(1.0, float(np.max(np.abs(loc["sigma"]), initial=0.0)))
        if res_norm <= RESIDUAL_RTOL * sigma_scale:
            return BarState(
                u=u,
                eps=loc["eps"],
                eps_p=loc["eps_p"],
                p=loc["p"],
                d=np.array(d, copy=True),
                sigma=loc["sigma"],
                T=loc["T"],
                u_d=u_d,
                body_force=None if body_force is None
                else np.asarray(body_force, dtype=float),
                iterations=iterations,
                residual_norm=res_norm,
                energy_history=energy_history,
            )
        if iterations >= max_iter:
            break
        du = solve_tridiagonal(system)
        f_now = total_potential(mesh, model, u, eps_p_n, p_n, d, f_ext)
        alpha = 1.0
        u_new = u + du
        f_new = total_potential(mesh, model, u_new, eps_p_n, p_n, d, f_ext)
        cuts = 0
        while f_new > f_now + 1e-12 * max(1.0, abs(f_now)) and cuts < 30:
            alpha *= 0.5
            u_new = u + alpha * du
            f_new = total_potential(mesh, model, u_new, eps_p_n, p_n, d, f_ext)
            cuts += 1
        energy_history.append(f_new)
        correction = float(np.max(np.abs(alpha * du)))
        u = u_new
        iterations += 1
        if correction <= tol:
            # next sweep recomputes internals and confirms via the residual
            continue
    raise NonConvergenceError(
        f"equilibrium did not converge in {max_iter} iterations "
        f"(last residual {residual_history[-1]:.3e})",
        iterations=max_iter,
        history=residual_history,
    )
