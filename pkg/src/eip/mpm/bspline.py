"""Quadratic B-spline kernel on a uniform grid (3 nodes per axis)."""
from __future__ import annotations

import numpy as np

# stencil offsets in (i, j, k) order, k fastest
STENCIL = np.array([(i, j, k) for i in range(3) for j in range(3) for k in range(3)], dtype=np.int64)


def quadratic_bspline(r):
    """N(r) for signed distance r in grid units."""
    r = np.abs(np.asarray(r, dtype=float))
    return np.where(r < 0.5, 0.75 - r**2, np.where(r < 1.5, 0.5 * (1.5 - r) ** 2, 0.0))


def bspline_weights(x, dx: float, n_nodes: int | None = None, margin: float = 2.0):
    """Return ``(base, w, fx)`` for particle position ``x``.

    ``base`` is the integer index of the first stencil node per axis, ``w[a, i]``
    the weight of node ``base[a] + i`` along axis ``a`` and ``fx = x / dx - base``.
    """
    xg = np.asarray(x, dtype=float) / dx
    if n_nodes is not None and (np.any(xg < margin) or np.any(xg > n_nodes - margin)):
        from .state import EscapeError

        raise EscapeError(f"position {np.asarray(x)} is outside the grid margin")
    base = np.floor(xg - 0.5).astype(np.int64)
    fx = xg - base
    w = np.stack([0.5 * (1.5 - fx) ** 2, 0.75 - (fx - 1.0) ** 2, 0.5 * (fx - 0.5) ** 2], axis=-1)
    return base, w, fx


def stencil_weights(w) -> np.ndarray:
    """Flatten per-axis weights (3, 3) to the 27 tensor-product weights in STENCIL order."""
    return w[0, STENCIL[:, 0]] * w[1, STENCIL[:, 1]] * w[2, STENCIL[:, 2]]
