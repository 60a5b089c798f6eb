"""Incremental potentials for three softening material models.

Each model is defined by an incremental energy density ``f`` of the strain,
the plastic internal variables and a scalar damage ``d``:

* ``SofteningElasticity``            f = (1-d)^2 * E eps^2 / 2 + Y_c h(d)
* ``SofteningElastoHardeningPlasticity``
                                     f = (1-d)^2 * f_p + Y_c h(d)
* ``SofteningPlasticity``            f = E (eps-eps_p)^2 / 2
                                         + (1-d)^2 sigma_y (p + k p^2/2)
                                         + sigma_y d^2

with ``f_p = E (eps-eps_p)^2 / 2 + sigma_y (p + k p^2/2)``. The softening
function ``h`` is either ``h1(d) = 2d + 3d^2`` or the cohesive-like
``h2(d) = (2d - d^2) / (1 - d + lam d^2)^2``; both satisfy ``h'(0) = 2`` so
damage starts when the driving energy density reaches ``Y_c``.

The module provides the dual quantities (stress, damage criterion ``mu``,
current yield stress ``R``), closed-form return mappings with algorithmic
tangents, constrained scalar damage minimization, and a KKT residual check.
All kernels are vectorized over numpy arrays; the public wrappers operate on
scalar ``PointState`` values.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Union

import numpy as np

from .errors import ConvexityError

# Damage cap: keeps (1-d)^2 strictly positive so the tangent stiffness stays
# positive definite. Energies change by O(1e-18 * f_e) relative to d = 1.
D_MAX = 1.0 - 1e-9


# ---------------------------------------------------------------------------
# Softening functions
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class H1:
    """Quadratic softening h(d) = 2d + 3d^2 (convex on [0, 1])."""

    def value(self, d):
        d = np.asarray(d, dtype=float)
        return 2.0 * d + 3.0 * d * d

    def deriv(self, d):
        d = np.asarray(d, dtype=float)
        return 2.0 + 6.0 * d

    def second(self, d):
        d = np.asarray(d, dtype=float)
        return np.full_like(d, 6.0)

    @property
    def second_min(self) -> float:
        return 6.0


@dataclass(frozen=True)
class H2:
    """Cohesive-like softening h(d) = (2d - d^2) / (1 - d + lam d^2)^2.

    ``lam`` ties the regularization length and the toughness,
    lam = 2 Y_c l / G_c. Validity requires 0 < lam <= 1/2; the function is
    convex on the whole interval only for lam <= 1/3 (the second derivative
    at d = 1 equals 6 (3 lam - 1)(lam - 1) / lam^4), so minimizations over d
    fall back to a global grid+refine search in the non-convex regime.
    """

    lam: float

    def __post_init__(self):
        if not 0.0 < self.lam <= 0.5:
            raise ConvexityError(
                f"h2 requires 0 < lam <= 1/2, got lam={self.lam}"
            )

    def value(self, d):
        d = np.asarray(d, dtype=float)
        den = 1.0 - d + self.lam * d * d
        return (2.0 * d - d * d) / (den * den)

    def deriv(self, d):
        d = np.asarray(d, dtype=float)
        n = 2.0 * d - d * d
        den = 1.0 - d + self.lam * d * d
        dden = 2.0 * self.lam * d - 1.0
        return ((2.0 - 2.0 * d) * den - 2.0 * n * dden) / den**3

    def second(self, d):
        d = np.asarray(d, dtype=float)
        n = 2.0 * d - d * d
        dn = 2.0 - 2.0 * d
        den = 1.0 - d + self.lam * d * d
        dden = 2.0 * self.lam * d - 1.0
        n1 = dn * den - 2.0 * n * dden
        dn1 = -2.0 * den - dn * dden - 4.0 * self.lam * n
        return (dn1 * den - 3.0 * n1 * dden) / den**4

    @property
    def second_min(self) -> float:
        # Sampled once; the minimum sits at or near d = 1 when lam > 1/3.
        d = np.linspace(0.0, 1.0, 2001)
        return float(np.min(self.second(d)))


SofteningLaw = Union[H1, H2]


def softening_h(law: SofteningLaw, d) -> tuple:
    """Evaluate a softening function and its first derivative at ``d``.

    Raises ValueError if ``d`` falls outside [0, 1].
    """
    arr = np.asarray(d, dtype=float)
    if np.any(arr < 0.0) or np.any(arr > 1.0):
        raise ValueError(f"damage outside [0, 1]: {d}")
    value = law.value(arr)
    deriv = law.deriv(arr)
    if np.isscalar(d) or arr.ndim == 0:
        return float(value), float(deriv)
    return value, deriv


def lambda_from_toughness(Y_c: float, l: float, G_c: float) -> float:
    """Softening parameter lam = 2 Y_c l / G_c of the cohesive-like law.

    Raises ConvexityError when the resulting lam exceeds 1/2 (invalid model).
    """
    if Y_c <= 0.0 or l <= 0.0 or G_c <= 0.0:
        raise ValueError("Y_c, l and G_c must all be positive")
    lam = 2.0 * Y_c * l / G_c
    if lam > 0.5:
        raise ConvexityError(
            f"lam = 2*Y_c*l/G_c = {lam} exceeds 1/2: softening law not convex"
        )
    return lam


# ---------------------------------------------------------------------------
# Value types
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class PointState:
    """State of one material point: strain, plastic variables, damage."""

    eps: float
    eps_p: float = 0.0
    p: float = 0.0
    d: float = 0.0

    def __post_init__(self):
        if not 0.0 <= self.d <= 1.0:
            raise ValueError(f"damage must lie in [0, 1], got {self.d}")
        if self.p < 0.0:
            raise ValueError(f"cumulative plasticity must be >= 0, got {self.p}")


@dataclass(frozen=True)
class Duals:
    """Derivatives of the potential: stress, damage criterion, yield stress."""

    sigma: float
    mu: float
    R: float | None = None


@dataclass(frozen=True)
class ReturnMapResult:
    eps_p: float
    p: float
    sigma: float
    T: float
    plastic: bool


@dataclass(frozen=True)
class KktReport:
    """Reconstructed multipliers and the worst violation of the conditions."""

    lam1: float
    lam2: float
    lam_p: float
    max_violation: float


# ---------------------------------------------------------------------------
# Scalar damage minimization helpers (vectorized over elements)
# ---------------------------------------------------------------------------

_BRACKET_TOL = 1e-10  # bracket width for safeguarded Newton/bisection
_GRID_K = 65  # sampling density of the global-argmin fallback


def _newton_increasing(g, gprime, lo, hi, x0=None):
    """Root of an increasing function on [lo, hi], clipped to the bracket.

    Vectorized safeguarded Newton: bisection step whenever the Newton step
    leaves the current bracket. Entries with g(lo) >= 0 or g(hi) <= 0 return
    the corresponding endpoint. ``x0`` warm-starts the iteration.
    """
    lo = np.array(lo, dtype=float, copy=True)
    hi = np.array(hi, dtype=float, copy=True)
    at_lo = g(lo) >= 0.0
    at_hi = g(hi) <= 0.0
    if x0 is None:
        x = 0.5 * (lo + hi)
    else:
        x = np.clip(np.array(x0, dtype=float, copy=True), lo, hi)
        # keep the iterate strictly inside so the first sign test is useful
        x = np.where((x <= lo) | (x >= hi), 0.5 * (lo + hi), x)
    active = ~(at_lo | at_hi) & (hi - lo > 0.0)
    x = np.where(active, x, 0.5 * (lo + hi))
    for _ in range(200):
        live = active & (hi - lo > _BRACKET_TOL)
        if not np.any(live):
            break
        gx = g(x)
        pos = gx > 0.0
        hi = np.where(live & pos, x, hi)
        lo = np.where(live & ~pos, x, lo)
        dg = gprime(x)
        with np.errstate(divide="ignore", invalid="ignore"):
            step = np.where(dg > 0.0, gx / np.where(dg > 0.0, dg, 1.0), 0.0)
        xn = x - step
        inside = (xn > lo) & (xn < hi)
        x = np.where(live, np.where(inside & (dg > 0.0), xn, 0.5 * (lo + hi)), x)
    x = np.where(at_lo, lo, np.where(at_hi, hi, x))
    return x


def _grid_argmin_refine(fval, g, lo, hi):
    """Global argmin of a (possibly non-convex) smooth scalar objective.

    Samples the objective on a dense grid per element, then refines the best
    bracket by bisection on the derivative ``g``. Used only where convexity
    of the damage objective is not guaranteed.
    """
    lo = np.asarray(lo, dtype=float)
    hi = np.asarray(hi, dtype=float)
    t = np.linspace(0.0, 1.0, _GRID_K)[:, None]
    grid = lo[None, :] + (hi - lo)[None, :] * t
    vals = fval(grid)
    jbest = np.argmin(vals, axis=0)
    idx = np.arange(lo.size)
    a = grid[np.maximum(jbest - 1, 0), idx]
    b = grid[np.minimum(jbest + 1, _GRID_K - 1), idx]
    ga = g(a)
    gb = g(b)
    # Local minimum inside (a, b) iff the derivative changes sign upward.
    root = (ga < 0.0) & (gb > 0.0)
    x = np.where(root, 0.5 * (a + b), grid[jbest, idx])
    aa = np.where(root, a, x)
    bb = np.where(root, b, x)
    for _ in range(60):
        if not np.any(root & (bb - aa > _BRACKET_TOL)):
            break
        gx = g(x)
        pos = gx > 0.0
        bb = np.where(root & pos, x, bb)
        aa = np.where(root & ~pos, x, aa)
        x = np.where(root, 0.5 * (aa + bb), x)
    return x


# ---------------------------------------------------------------------------
# Material models
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class SofteningElasticity:
    """Elastic model whose stiffness degrades as (1-d)^2."""

    E: float
    Y_c: float
    softening: SofteningLaw = H1()
    has_plasticity = False

    def __post_init__(self):
        if self.E <= 0.0 or self.Y_c <= 0.0:
            raise ValueError("E and Y_c must be positive")

    def elastic_modulus(self, d):
        d = np.asarray(d, dtype=float)
        return (1.0 - d) ** 2 * self.E

    def driving_energy(self, eps, eps_p, p):
        eps = np.asarray(eps, dtype=float)
        return 0.5 * self.E * eps * eps

    def potential(self, eps, eps_p, p, d):
        d = np.asarray(d, dtype=float)
        q = self.driving_energy(eps, eps_p, p)
        return (1.0 - d) ** 2 * q + self.Y_c * self.softening.value(d)

    def stress(self, eps, eps_p, p, d):
        eps = np.asarray(eps, dtype=float)
        d = np.asarray(d, dtype=float)
        return (1.0 - d) ** 2 * self.E * eps

    def mu(self, eps, eps_p, p, d):
        d = np.asarray(d, dtype=float)
        q = self.driving_energy(eps, eps_p, p)
        return -2.0 * (1.0 - d) * q + self.Y_c * self.softening.deriv(d)

    def mu_prime(self, eps, eps_p, p, d):
        d = np.asarray(d, dtype=float)
        q = self.driving_energy(eps, eps_p, p)
        return 2.0 * q + self.Y_c * self.softening.second(d)

    def return_map_arrays(self, eps, eps_p_n, p_n, d):
        eps = np.asarray(eps, dtype=float)
        d = np.asarray(d, dtype=float)
        w = (1.0 - d) ** 2
        sigma = w * self.E * eps
        T = np.broadcast_to(w * self.E, sigma.shape).copy()
        zero = np.zeros_like(sigma)
        plastic = np.zeros(sigma.shape, dtype=bool)
        return zero, zero.copy(), sigma, T, plastic

    def damage_argmin(self, eps, eps_p, p, lo, hi, slope=0.0, x0=None):
        return _softening_damage_argmin(self, eps, eps_p, p, lo, hi, slope, x0)


@dataclass(frozen=True)
class SofteningElastoHardeningPlasticity:
    """Hardening von Mises plasticity with (1-d)^2 acting on the whole
    stored-plus-hardening energy (effective stress approach)."""

    E: float
    Y_c: float
    sigma_y: float
    k: float
    softening: SofteningLaw = H1()
    has_plasticity = True

    def __post_init__(self):
        if self.E <= 0.0 or self.Y_c <= 0.0 or self.sigma_y <= 0.0 or self.k < 0.0:
            raise ValueError("require E > 0, Y_c > 0, sigma_y > 0, k >= 0")

    def elastic_modulus(self, d):
        d = np.asarray(d, dtype=float)
        return (1.0 - d) ** 2 * self.E

    def driving_energy(self, eps, eps_p, p):
        eps = np.asarray(eps, dtype=float)
        eps_p = np.asarray(eps_p, dtype=float)
        p = np.asarray(p, dtype=float)
        e = eps - eps_p
        return 0.5 * self.E * e * e + self.sigma_y * (p + 0.5 * self.k * p * p)

    def potential(self, eps, eps_p, p, d):
        d = np.asarray(d, dtype=float)
        q = self.driving_energy(eps, eps_p, p)
        return (1.0 - d) ** 2 * q + self.Y_c * self.softening.value(d)

    def stress(self, eps, eps_p, p, d):
        eps = np.asarray(eps, dtype=float)
        eps_p = np.asarray(eps_p, dtype=float)
        d = np.asarray(d, dtype=float)
        return (1.0 - d) ** 2 * self.E * (eps - eps_p)

    def yield_R(self, p, d):
        p = np.asarray(p, dtype=float)
        d = np.asarray(d, dtype=float)
        return self.sigma_y * (1.0 - d) ** 2 * (1.0 + self.k * p)

    def mu(self, eps, eps_p, p, d):
        d = np.asarray(d, dtype=float)
        q = self.driving_energy(eps, eps_p, p)
        return -2.0 * (1.0 - d) * q + self.Y_c * self.softening.deriv(d)

    def mu_prime(self, eps, eps_p, p, d):
        d = np.asarray(d, dtype=float)
        q = self.driving_energy(eps, eps_p, p)
        return 2.0 * q + self.Y_c * self.softening.second(d)

    def return_map_arrays(self, eps, eps_p_n, p_n, d):
        eps = np.asarray(eps, dtype=float)
        eps_p_n = np.asarray(eps_p_n, dtype=float)
        p_n = np.asarray(p_n, dtype=float)
        d = np.asarray(d, dtype=float)
        E, sy, k = self.E, self.sigma_y, self.k
        w = (1.0 - d) ** 2
        # The (1-d)^2 factor multiplies the whole plastic energy, so the
        # minimizing internals are damage-independent: work with the
        # effective (undamaged) trial stress.
        s_eff = E * (eps - eps_p_n)
        f_eff = np.abs(s_eff) - sy * (1.0 + k * p_n)
        plastic = f_eff > 0.0
        dp = np.where(plastic, f_eff / (E + sy * k), 0.0)
        p = p_n + dp
        eps_p = eps_p_n + dp * np.sign(s_eff)
        sigma = w * E * (eps - eps_p)
        T = np.where(plastic, w * E * sy * k / (E + sy * k), w * E)
        return eps_p, p, sigma, np.broadcast_to(T, sigma.shape).copy(), plastic

    def damage_argmin(self, eps, eps_p, p, lo, hi, slope=0.0, x0=None):
        return _softening_damage_argmin(self, eps, eps_p, p, lo, hi, slope, x0)


@dataclass(frozen=True)
class SofteningPlasticity:
    """Plasticity whose yield stress decays as (1-d)^2; elasticity intact.

    The softening term is g(d) = d^2 (fixed); damage growth is driven by the
    accumulated plastic work, not the elastic strain.
    """

    E: float
    sigma_y: float
    k: float
    has_plasticity = True

    def __post_init__(self):
        if self.E <= 0.0 or self.sigma_y <= 0.0 or self.k < 0.0:
            raise ValueError("require E > 0, sigma_y > 0, k >= 0")

    def elastic_modulus(self, d):
        d = np.asarray(d, dtype=float)
        return np.broadcast_to(np.asarray(self.E, dtype=float), d.shape).copy()

    def hardening_P(self, p):
        p = np.asarray(p, dtype=float)
        return p + 0.5 * self.k * p * p

    def potential(self, eps, eps_p, p, d):
        eps = np.asarray(eps, dtype=float)
        eps_p = np.asarray(eps_p, dtype=float)
        d = np.asarray(d, dtype=float)
        e = eps - eps_p
        return (
            0.5 * self.E * e * e
            + (1.0 - d) ** 2 * self.sigma_y * self.hardening_P(p)
            + self.sigma_y * d * d
        )

    def stress(self, eps, eps_p, p, d):
        eps = np.asarray(eps, dtype=float)
        eps_p = np.asarray(eps_p, dtype=float)
        return self.E * (eps - eps_p)

    def yield_R(self, p, d):
        p = np.asarray(p, dtype=float)
        d = np.asarray(d, dtype=float)
        return self.sigma_y * (1.0 - d) ** 2 * (1.0 + self.k * p)

    def mu(self, eps, eps_p, p, d):
        d = np.asarray(d, dtype=float)
        P = self.hardening_P(p)
        return -2.0 * (1.0 - d) * self.sigma_y * P + 2.0 * self.sigma_y * d

    def mu_prime(self, eps, eps_p, p, d):
        d = np.asarray(d, dtype=float)
        P = self.hardening_P(p)
        return np.broadcast_to(2.0 * self.sigma_y * (P + 1.0), d.shape).copy()

    def return_map_arrays(self, eps, eps_p_n, p_n, d):
        eps = np.asarray(eps, dtype=float)
        eps_p_n = np.asarray(eps_p_n, dtype=float)
        p_n = np.asarray(p_n, dtype=float)
        d = np.asarray(d, dtype=float)
        E, sy, k = self.E, self.sigma_y, self.k
        w = (1.0 - d) ** 2
        s_t = E * (eps - eps_p_n)
        f_t = np.abs(s_t) - sy * w * (1.0 + k * p_n)
        plastic = f_t > 0.0
        denom = E + sy * k * w
        dp = np.where(plastic, f_t / denom, 0.0)
        p = p_n + dp
        eps_p = eps_p_n + dp * np.sign(s_t)
        sigma = E * (eps - eps_p)
        T = np.where(plastic, E * sy * k * w / denom, E)
        return eps_p, p, sigma, np.broadcast_to(T, sigma.shape).copy(), plastic

    def damage_argmin(self, eps, eps_p, p, lo, hi, slope=0.0, x0=None):
        # Objective (1-d)^2 sy P + sy d^2 + slope*d is strictly convex;
        # its stationary point has a closed form (x0 unused).
        p = np.asarray(p, dtype=float)
        lo = np.asarray(lo, dtype=float)
        hi = np.asarray(hi, dtype=float)
        slope = np.asarray(slope, dtype=float)
        P = self.hardening_P(p)
        root = (2.0 * self.sigma_y * P - slope) / (2.0 * self.sigma_y * (P + 1.0))
        out = np.clip(root, lo, hi)
        return np.broadcast_to(out, np.broadcast_shapes(p.shape, lo.shape)).copy()


MaterialModel = Union[
    SofteningElasticity, SofteningElastoHardeningPlasticity, SofteningPlasticity
]


def _softening_damage_argmin(model, eps, eps_p, p, lo, hi, slope, x0=None):
    """Minimize (1-d)^2 q + Y_c h(d) + slope*d over [lo, hi], elementwise."""
    q = np.asarray(model.driving_energy(eps, eps_p, p), dtype=float)
    lo = np.asarray(lo, dtype=float)
    hi = np.asarray(hi, dtype=float)
    slope = np.asarray(slope, dtype=float)
    shape = np.broadcast_shapes(q.shape, lo.shape, hi.shape, slope.shape)
    law = model.softening
    Yc = model.Y_c
    if isinstance(law, H1):
        root = (2.0 * q - 2.0 * Yc - slope) / (2.0 * q + 6.0 * Yc)
        return np.clip(np.broadcast_to(root, shape), lo, hi).copy()

    q = np.broadcast_to(q, shape).ravel()
    lo = np.broadcast_to(lo, shape).ravel()
    hi = np.broadcast_to(hi, shape).ravel()
    slope = np.broadcast_to(slope, shape).ravel()
    warm = None if x0 is None else np.broadcast_to(
        np.asarray(x0, dtype=float), shape).ravel()
    out = np.empty_like(q)
    # The objective is convex in d iff 2q + Y_c h''(d) >= 0 on the bracket.
    convex = 2.0 * q + Yc * law.second_min >= 0.0
    for mask, solver in ((convex, "newton"), (~convex, "grid")):
        if not np.any(mask):
            continue
        qm, lom, him, sm = q[mask], lo[mask], hi[mask], slope[mask]

        def g(d, qm=qm, sm=sm):
            return -2.0 * (1.0 - d) * qm + Yc * law.deriv(d) + sm

        def gp(d, qm=qm):
            return 2.0 * qm + Yc * law.second(d)

        if solver == "newton":
            out[mask] = _newton_increasing(
                g, gp, lom, him, None if warm is None else warm[mask])
        else:

            def fv(d, qm=qm, sm=sm):
                return (1.0 - d) ** 2 * qm + Yc * law.value(d) + sm * d

            out[mask] = _grid_argmin_refine(fv, g, lom, him)
    return out.reshape(shape)


# ---------------------------------------------------------------------------
# Public point-level operations
# ---------------------------------------------------------------------------


def _check_plastic_state(model, state: PointState):
    if not model.has_plasticity and (state.eps_p != 0.0 or state.p != 0.0):
        raise ValueError("elastic model carries no plastic variables")


def potential_density(model: MaterialModel, state: PointState) -> float:
    """Incremental energy density of the model at a point state."""
    _check_plastic_state(model, state)
    return float(model.potential(state.eps, state.eps_p, state.p, state.d))


def duals(model: MaterialModel, state: PointState) -> Duals:
    """Stress, damage criterion and (for plastic models) yield stress.

    These are the analytic derivatives of ``potential_density`` with respect
    to strain, damage and cumulative plasticity.
    """
    _check_plastic_state(model, state)
    sigma = float(model.stress(state.eps, state.eps_p, state.p, state.d))
    mu = float(model.mu(state.eps, state.eps_p, state.p, state.d))
    R = float(model.yield_R(state.p, state.d)) if model.has_plasticity else None
    return Duals(sigma=sigma, mu=mu, R=R)


def return_map(
    model: MaterialModel, eps: float, eps_p_n: float, p_n: float, d: float
) -> ReturnMapResult:
    """Closed-form update of the plastic variables at frozen damage.

    Elastic branch returns the trial state; the plastic branch restores
    consistency |sigma| = R(p, d) and reports the algorithmic tangent of
    the active branch.
    """
    if p_n < 0.0:
        raise ValueError("p_n must be >= 0")
    if not 0.0 <= d <= 1.0:
        raise ValueError("d must lie in [0, 1]")
    eps_p, p, sigma, T, plastic = model.return_map_arrays(
        np.asarray(eps, dtype=float),
        np.asarray(eps_p_n, dtype=float),
        np.asarray(p_n, dtype=float),
        np.asarray(d, dtype=float),
    )
    return ReturnMapResult(
        eps_p=float(eps_p), p=float(p), sigma=float(sigma), T=float(T),
        plastic=bool(plastic),
    )


def kkt_check(
    model: MaterialModel,
    state: PointState,
    state_n: PointState,
    tol: float = 1e-9,
    lip_force: float = 0.0,
) -> KktReport:
    """Reconstruct the optimality multipliers at a converged point.

    ``lip_force`` is the per-point reaction of any outer coupling constraint
    on the damage variable (zero for a purely pointwise problem); it enters
    the damage stationarity as an additive term. The report carries the
    bound multipliers, the plastic multiplier and the worst violation of
    sign, feasibility and complementarity.
    """
    _check_plastic_state(model, state)
    violations = []

    mu_eff = float(model.mu(state.eps, state.eps_p, state.p, state.d)) + lip_force
    lam1 = max(mu_eff, 0.0)
    lam2 = max(-mu_eff, 0.0)
    gap_lo = state.d - state_n.d
    gap_hi = 1.0 - state.d
    violations.append(max(-gap_lo, 0.0))  # irreversibility
    violations.append(max(-gap_hi, 0.0))  # d <= 1
    violations.append(abs(lam1 * gap_lo))
    violations.append(abs(lam2 * gap_hi))

    lam_p = 0.0
    if model.has_plasticity:
        lam_p = float(model.yield_R(state.p, state.d))
        sigma = float(model.stress(state.eps, state.eps_p, state.p, state.d))
        d_eps_p = state.eps_p - state_n.eps_p
        d_p = state.p - state_n.p
        gap = d_p - abs(d_eps_p)
        violations.append(max(-gap, 0.0))
        violations.append(abs(lam_p * gap))
        violations.append(max(-lam_p, 0.0))
        if abs(d_eps_p) > tol:
            violations.append(abs(sigma - lam_p * np.sign(d_eps_p)))
        else:
            violations.append(max(abs(sigma) - lam_p, 0.0))

    return KktReport(
        lam1=lam1, lam2=lam2, lam_p=lam_p, max_violation=float(max(violations))
    )
