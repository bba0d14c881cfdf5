"""Background grid storage, velocity normalization and boundary conditions.

The grid is stored only over the active box of nodes touched by particle
stencils.  ``lo`` is the global index of box node (0, 0, 0); nodes outside the
box have zero mass and zero velocity by definition.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

MASS_EPSILON = 1e-12
WALL_CELLS = 2


@dataclass
class Grid:
    n: int  # nodes per axis over the unit-length domain
    dx: float
    lo: np.ndarray = field(default_factory=lambda: np.zeros(3, dtype=np.int64))
    mass_q: np.ndarray | None = None  # fixed-point mass quanta
    mass_unit: float = 1.0
    momentum: np.ndarray | None = None
    velocity: np.ndarray | None = None

    @classmethod
    def for_domain(cls, n: int, length: float = 1.0) -> "Grid":
        if n < 8:
            raise ValueError(f"grid needs at least 8 nodes per axis, got {n}")
        return cls(n=n, dx=length / n)

    def allocate(self, lo, shape, mass_unit: float) -> None:
        self.lo = np.asarray(lo, dtype=np.int64)
        shape = tuple(int(s) for s in shape)
        self.mass_q = np.zeros(shape, dtype=np.int64)
        self.momentum = np.zeros(shape + (3,))
        self.velocity = np.zeros(shape + (3,))
        self.mass_unit = mass_unit

    @property
    def shape(self) -> tuple[int, int, int]:
        return self.mass_q.shape

    @property
    def mass(self) -> np.ndarray:
        return self.mass_q * self.mass_unit

    def total_mass(self) -> float:
        # integer sum is exact; the single conversion is the only rounding
        return float(int(self.mass_q.sum(dtype=np.int64))) * self.mass_unit

    def node_indices(self) -> np.ndarray:
        """Global (i, j, k) of every box node, shape box + (3,)."""
        axes = [np.arange(s) + self.lo[a] for a, s in enumerate(self.shape)]
        return np.stack(np.meshgrid(*axes, indexing="ij"), axis=-1)

    def node_positions(self) -> np.ndarray:
        return self.node_indices() * self.dx


def grid_normalize(grid: Grid, mass_epsilon: float = MASS_EPSILON) -> Grid:
    m = grid.mass
    live = m > mass_epsilon
    grid.velocity = np.zeros_like(grid.momentum)
    grid.velocity[live] = grid.momentum[live] / m[live][:, None]
    return grid


def apply_constraints(grid: Grid, sticky=None, wall_cells: int = WALL_CELLS) -> Grid:
    """Sticky object nodes and separating domain walls.

    ``sticky`` is a boolean array over the full n^3 grid (or None).  Nodes within
    ``wall_cells`` of a domain face lose their outward velocity component.
    """
    v = grid.velocity
    if sticky is not None:
        box = tuple(slice(grid.lo[a], grid.lo[a] + grid.shape[a]) for a in range(3))
        v[sticky[box]] = 0.0
    for a in range(3):
        idx = np.arange(grid.shape[a]) + grid.lo[a]
        shape = [1, 1, 1]
        shape[a] = -1
        low = (idx < wall_cells).reshape(shape)
        high = (idx >= grid.n - wall_cells).reshape(shape)
        comp = v[..., a]
        comp[np.broadcast_to(low, comp.shape) & (comp < 0)] = 0.0
        comp[np.broadcast_to(high, comp.shape) & (comp > 0)] = 0.0
    return grid
