"""Uniform 1-D mesh over [0, L].

Displacements live at the nodes, internal variables (plastic strain,
cumulative plasticity, damage) at the element centroids. The centroid
distance is the metric entering the Lipschitz constraint; on an interval
it is simply ``h * |i - j|``.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np


@dataclass(frozen=True)
class Mesh1D:
    """Uniform interval mesh: N equal elements over [0, L]."""

    L: float
    N: int
    h: float = field(init=False)
    node_positions: np.ndarray = field(init=False, repr=False)
    centroid_positions: np.ndarray = field(init=False, repr=False)

    def __post_init__(self):
        if not self.L > 0.0:
            raise ValueError(f"bar length must be positive, got L={self.L}")
        if not (isinstance(self.N, (int, np.integer)) and self.N >= 1):
            raise ValueError(f"element count must be a positive integer, got N={self.N}")
        h = self.L / self.N
        object.__setattr__(self, "h", h)
        nodes = np.linspace(0.0, self.L, self.N + 1)
        centroids = (np.arange(self.N) + 0.5) * h
        nodes.setflags(write=False)
        centroids.setflags(write=False)
        object.__setattr__(self, "node_positions", nodes)
        object.__setattr__(self, "centroid_positions", centroids)


def build_uniform_mesh(L: float, N: int) -> Mesh1D:
    """Build a uniform mesh of N elements over [0, L]."""
    return Mesh1D(L=float(L), N=int(N))


def centroid_distance(mesh: Mesh1D, i: int, j: int) -> float:
    """Path distance between the centroids of elements i and j."""
    n = mesh.N
    if not (0 <= i < n) or not (0 <= j < n):
        raise ValueError(f"element index out of range: i={i}, j={j}, N={n}")
    return mesh.h * abs(i - j)
