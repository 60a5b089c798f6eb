"""Slope-bounded damage fields: membership test, envelope projections, bounds.

A damage field over the mesh belongs to the admissible set when its discrete
Lipschitz constant (largest pairwise difference divided by centroid distance)
stays below ``1/l``. Fields violating the bound are bracketed by two envelope
transforms,

    lower[i] = min_j (d[j] + dist(i, j) / l)
    upper[i] = max_j (d[j] - dist(i, j) / l)

which both live in the admissible set and sandwich the constrained optimum of
any pointwise-convex objective. Wherever the two envelopes agree, the
constrained optimum equals the unconstrained trial field, so the expensive
coupled minimization only runs on the remaining "free" elements.

On a uniform 1-D mesh both envelopes reduce to prefix/suffix scans in O(N):
``min_{j<=i}(d_j + (i-j) s) = i s + min_{j<=i}(d_j - j s)`` with ``s = h/l``,
and symmetrically from the right. The quadratic all-pairs definition is kept
as a test oracle.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .mesh import Mesh1D

# Envelope equality tolerance: the projections are exact min/max of affine
# expressions, so a gap beyond rounding means the element is genuinely free.
BOUND_EQUAL_TOL = 1e-9


@dataclass(frozen=True)
class BoundsResult:
    lower: np.ndarray
    upper: np.ndarray
    free_elements: np.ndarray


def _check_field(mesh: Mesh1D, d: np.ndarray) -> np.ndarray:
    d = np.asarray(d, dtype=float)
    if d.shape != (mesh.N,):
        raise ValueError(f"field has shape {d.shape}, expected ({mesh.N},)")
    return d


def lip_constant(mesh: Mesh1D, d) -> float:
    """Discrete Lipschitz constant of a per-element field.

    On a uniform interval mesh the pairwise maximum of
    |d_i - d_j| / dist(i, j) is attained on an adjacent pair.
    """
    d = _check_field(mesh, d)
    if mesh.N == 1:
        return 0.0
    return float(np.max(np.abs(np.diff(d))) / mesh.h)


def lip_constant_all_pairs(mesh: Mesh1D, d) -> float:
    """O(N^2) all-pairs Lipschitz constant (test oracle)."""
    d = _check_field(mesh, d)
    if mesh.N == 1:
        return 0.0
    x = mesh.centroid_positions
    num = np.abs(d[:, None] - d[None, :])
    den = np.abs(x[:, None] - x[None, :])
    mask = ~np.eye(mesh.N, dtype=bool)
    return float(np.max(num[mask] / den[mask]))


def is_lip(mesh: Mesh1D, d, l: float, tol: float = 0.0) -> bool:
    """True iff the field's Lipschitz constant is at most 1/l + tol."""
    if l <= 0.0:
        raise ValueError("regularization length must be positive")
    return lip_constant(mesh, d) <= 1.0 / l + tol


def lower_projection(mesh: Mesh1D, d, l: float) -> np.ndarray:
    """Largest slope-bounded field below ``d`` that agrees with its minima."""
    d = _check_field(mesh, d)
    if l <= 0.0:
        raise ValueError("regularization length must be positive")
    s = mesh.h / l
    i = np.arange(mesh.N)
    left = np.minimum.accumulate(d - i * s) + i * s
    right = (np.minimum.accumulate((d + i * s)[::-1])[::-1]) - i * s
    # The j = i term makes the exact envelope <= d; clamp away the sub-ulp
    # excess the shifted prefix sums can introduce.
    return np.minimum(np.minimum(left, right), d)


def upper_projection(mesh: Mesh1D, d, l: float) -> np.ndarray:
    """Smallest slope-bounded field above ``d`` that agrees with its maxima."""
    d = _check_field(mesh, d)
    if l <= 0.0:
        raise ValueError("regularization length must be positive")
    s = mesh.h / l
    i = np.arange(mesh.N)
    left = np.maximum.accumulate(d + i * s) - i * s
    right = (np.maximum.accumulate((d - i * s)[::-1])[::-1]) + i * s
    return np.maximum(np.maximum(left, right), d)


def lower_projection_all_pairs(mesh: Mesh1D, d, l: float) -> np.ndarray:
    """O(N^2) definition of the lower envelope (test oracle)."""
    d = _check_field(mesh, d)
    x = mesh.centroid_positions
    dist = np.abs(x[:, None] - x[None, :])
    return np.min(d[None, :] + dist / l, axis=1)


def upper_projection_all_pairs(mesh: Mesh1D, d, l: float) -> np.ndarray:
    """O(N^2) definition of the upper envelope (test oracle)."""
    d = _check_field(mesh, d)
    x = mesh.centroid_positions
    dist = np.abs(x[:, None] - x[None, :])
    return np.max(d[None, :] - dist / l, axis=1)


def compute_bounds(
    mesh: Mesh1D,
    d_n,
    d_bar,
    l: float,
    tol: float = BOUND_EQUAL_TOL,
    lip_tol: float = 1e-12,
) -> BoundsResult:
    """Envelope bounds of the constrained damage update and the free set.

    Preconditions: ``d_n`` is slope-feasible at 1/l up to ``lip_tol`` (a
    larger violation signals a corrupted time step) and ``d_n <= d_bar``
    elementwise. The returned bounds satisfy the chain
    d_n <= lower <= d_bar <= upper <= 1 up to the same slack. Callers whose
    previous field was itself produced by an iterative solve pass its
    feasibility tolerance as ``lip_tol``.
    """
    d_n = _check_field(mesh, d_n)
    d_bar = _check_field(mesh, d_bar)
    if not is_lip(mesh, d_n, l, tol=lip_tol):
        raise ValueError("previous damage field violates the Lipschitz bound")
    if np.any(d_bar < d_n - 1e-12):
        raise ValueError("trial damage below previous damage (irreversibility)")
    if np.any(d_bar > 1.0 + 1e-12):
        raise ValueError("trial damage exceeds 1")
    lower = lower_projection(mesh, d_bar, l)
    upper = upper_projection(mesh, d_bar, l)
    chain_slack = max(1e-9, lip_tol * mesh.L)
    if (
        np.any(lower < d_n - chain_slack)
        or np.any(d_bar < lower - chain_slack)
        or np.any(upper < d_bar - chain_slack)
        or np.any(upper > 1.0 + chain_slack)
    ):
        raise RuntimeError("projection bound chain violated; inputs corrupted")
    free = np.nonzero(upper - lower > tol)[0]
    return BoundsResult(lower=lower, upper=upper, free_elements=free)
