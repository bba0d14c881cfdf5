"""Simulation state and the explicit MLS-MPM time step.

One step: allocate the active grid box, scatter mass and momentum
(``p2g_scatter``), normalize to velocities, apply object and wall constraints,
then gather per particle, blend with the robot-hand velocity and update C, x, F.

Two execution modes share the same kernels:

* serial (``threads=0``): one pass over all particles into the shared grid.
  This is the reference.
* parallel (``threads=k``): particles split into ``k`` contiguous chunks, each
  scattered into its own scratch grid on a worker thread; scratch grids are
  summed in chunk order so results are identical run to run.
"""
from __future__ import annotations

import math
import os
import struct
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from ..material import InversionError, MaterialParams, pk1_stress
from ..voxelize import ParticleSet, RigidOccupancy
from . import kernels
from .bspline import STENCIL, bspline_weights, stencil_weights
from .grid import MASS_EPSILON, Grid, apply_constraints, grid_normalize

DEFAULT_DT = 1e-4
CFL_NUMBER = 0.4
MASS_QUANTA_BITS = 40


class SimulationError(RuntimeError):
    def __init__(self, message: str, particle: int | None = None, step: int | None = None):
        super().__init__(message)
        self.particle = particle
        self.step = step


class EscapeError(SimulationError):
    """A particle left the grid interior margin."""


class ParticleInversionError(SimulationError, InversionError):
    """A particle's deformation gradient reached det(F) <= 0."""


def default_threads() -> int:
    env = os.environ.get("EIP_THREADS")
    if env:
        return max(1, int(env))
    return max(1, os.cpu_count() or 1)


@dataclass
class SimState:
    x: np.ndarray
    v: np.ndarray
    C: np.ndarray
    F: np.ndarray
    mass: np.ndarray
    volume: np.ndarray
    layer: np.ndarray
    alpha: np.ndarray
    rest: np.ndarray  # positions at step 0
    grid: Grid
    dt: float
    gamma: float
    params: MaterialParams
    mass_unit: float
    mass_q: np.ndarray
    occupancy: RigidOccupancy | None = None
    sticky: np.ndarray | None = None  # (n, n, n) bool, nodes inside the object
    n: int = 0  # step index
    hand_offset: np.ndarray = field(default_factory=lambda: np.zeros(3))
    affine_source: str = "grid"
    clamp_particles: bool = False  # also stop particles entering occupied voxels
    frame: np.ndarray = field(default_factory=lambda: np.eye(3))  # rows u, v, contact normal
    face_size: tuple[float, float] = (0.0, 0.0)

    @property
    def n_particles(self) -> int:
        return len(self.x)

    @property
    def layer_count(self) -> int:
        return int(self.layer.max()) + 1

    def copy(self) -> "SimState":
        out = SimState(**{k: getattr(self, k) for k in self.__dataclass_fields__})
        for name in ("x", "v", "C", "F", "hand_offset"):
            setattr(out, name, getattr(self, name).copy())
        out.grid = Grid(self.grid.n, self.grid.dx)
        return out


def coefficient_gamma(dt: float, dx: float, volume: float) -> float:
    return 4.0 * dt / dx**2 * volume


def _mass_quantization(mass: np.ndarray) -> tuple[float, np.ndarray]:
    """Power-of-two unit so the largest particle mass spans MASS_QUANTA_BITS bits."""
    unit = math.ldexp(1.0, math.frexp(float(mass.max()))[1] - MASS_QUANTA_BITS)
    return unit, np.rint(mass / unit).astype(np.int64)


def make_state(
    particles: ParticleSet,
    grid_nodes: int,
    params: MaterialParams,
    dt: float = DEFAULT_DT,
    alpha=None,
    velocity=None,
    occupancy: RigidOccupancy | None = None,
    affine_source: str = "grid",
    frame=None,
    face_size=(0.0, 0.0),
    clamp_particles: bool = False,
) -> SimState:
    grid = Grid.for_domain(grid_nodes)
    n = len(particles)
    vol = np.asarray(particles.volume, dtype=float)
    if not np.all(vol == vol[0]):
        raise ValueError("particles must share one initial volume (gamma is a single coefficient)")
    if affine_source not in ("grid", "particle"):
        raise ValueError(f"affine_source must be 'grid' or 'particle', got {affine_source!r}")
    x = np.array(particles.positions, dtype=float)
    v = np.zeros((n, 3)) if velocity is None else np.broadcast_to(np.asarray(velocity, float), (n, 3)).copy()
    alpha = np.ones(n) if alpha is None else np.asarray(alpha, dtype=float).copy()
    if alpha.shape != (n,):
        raise ValueError(f"alpha must have one weight per particle ({n}), got shape {alpha.shape}")
    if np.any((alpha < 0) | (alpha > 1)):
        raise ValueError("alpha weights must lie in [0, 1]")
    unit, mass_q = _mass_quantization(np.asarray(particles.mass, dtype=float))
    state = SimState(
        x=x,
        v=v,
        C=np.zeros((n, 3, 3)),
        F=np.tile(np.eye(3), (n, 1, 1)),
        mass=np.asarray(particles.mass, dtype=float).copy(),
        volume=vol.copy(),
        layer=np.asarray(particles.layer).copy(),
        alpha=alpha,
        rest=x.copy(),
        grid=grid,
        dt=float(dt),
        gamma=coefficient_gamma(dt, grid.dx, float(vol[0])),
        params=params,
        mass_unit=unit,
        mass_q=mass_q,
        occupancy=occupancy,
        affine_source=affine_source,
        clamp_particles=clamp_particles,
        frame=np.eye(3) if frame is None else np.asarray(frame, dtype=float),
        face_size=tuple(face_size),
    )
    if occupancy is not None:
        state.sticky = sticky_nodes(occupancy, grid)
    _check_margin(state)
    return state


def sticky_nodes(occupancy: RigidOccupancy, grid: Grid) -> np.ndarray:
    """Boolean (n, n, n): grid nodes whose positions fall in occupied voxels."""
    sticky = np.zeros((grid.n,) * 3, dtype=bool)
    lo = occupancy.origin
    hi = occupancy.origin + np.array(occupancy.occupied.shape) * occupancy.voxel_size
    i0 = np.clip(np.floor(lo / grid.dx).astype(int), 0, grid.n)
    i1 = np.clip(np.ceil(hi / grid.dx).astype(int) + 1, 0, grid.n)
    axes = [np.arange(i0[a], i1[a]) for a in range(3)]
    if any(len(ax) == 0 for ax in axes):
        return sticky
    ijk = np.stack(np.meshgrid(*axes, indexing="ij"), axis=-1).reshape(-1, 3)
    inside = occupancy.contains(ijk * grid.dx)
    hit = ijk[inside]
    sticky[hit[:, 0], hit[:, 1], hit[:, 2]] = True
    return sticky


def _check_margin(state: SimState) -> None:
    xg = state.x / state.grid.dx
    bad = np.nonzero(np.any((xg < 2.0) | (xg > state.grid.n - 2.0), axis=1))[0]
    if len(bad):
        raise EscapeError(
            f"particle {bad[0]} at {state.x[bad[0]]} is outside the grid margin at step {state.n}",
            particle=int(bad[0]),
            step=state.n,
        )


def _chunks(n: int, k: int) -> list[tuple[int, int]]:
    k = max(1, min(k, n))
    edges = np.linspace(0, n, k + 1).round().astype(int)
    return [(int(a), int(b)) for a, b in zip(edges[:-1], edges[1:])]


def _run(fn, count: int, threads: int) -> list:
    """Call ``fn(i)`` for each chunk index, on worker threads when ``threads > 1``."""
    if threads <= 1 or count == 1:
        return [fn(i) for i in range(count)]
    with ThreadPoolExecutor(max_workers=threads) as pool:
        return list(pool.map(fn, range(count)))


def _affine(state: SimState, threads: int) -> np.ndarray:
    A = np.empty_like(state.C)
    p = state.params
    ranges = _chunks(state.n_particles, threads) if threads else [(0, state.n_particles)]

    def work(i):
        a, b = ranges[i]
        return kernels.affine_momentum(state.F, state.C, state.mass, state.gamma, p.mu, p.lam, A, a, b)

    bad = [r for r in _run(work, len(ranges), threads) if r >= 0]
    if bad:
        i = min(bad)
        raise ParticleInversionError(
            f"det(F) <= 0 for particle {i} at step {state.n}", particle=i, step=state.n
        )
    return A


def p2g_scatter(state: SimState, threads: int = 0) -> Grid:
    """Zero the active grid box and scatter mass and momentum into it."""
    _check_margin(state)
    grid = state.grid
    base = np.floor(state.x / grid.dx - 0.5).astype(np.int64)
    lo = base.min(axis=0)
    shape = base.max(axis=0) - lo + 3
    grid.allocate(lo, shape, state.mass_unit)
    A = _affine(state, threads)
    inv_dx = 1.0 / grid.dx
    args = (state.x, state.v, A, state.mass_q, state.mass_unit, inv_dx, grid.dx, grid.n, grid.lo)
    if not threads:
        kernels.p2g(*args, grid.mass_q, grid.momentum, 0, state.n_particles)
        return grid
    ranges = _chunks(state.n_particles, threads)
    bufs = [(np.zeros_like(grid.mass_q), np.zeros_like(grid.momentum)) for _ in ranges]

    def work(i):
        a, b = ranges[i]
        return kernels.p2g(*args, bufs[i][0], bufs[i][1], a, b)

    _run(work, len(ranges), threads)
    for mq, mom in bufs:  # fixed reduction order
        grid.mass_q += mq
        grid.momentum += mom
    return grid


def _occupancy_arrays(state: SimState):
    occ = state.occupancy
    if occ is None or not state.clamp_particles:
        return np.zeros((0, 0, 0), dtype=np.bool_), np.zeros(3), 1.0
    return occ.occupied, np.asarray(occ.origin, dtype=float), float(occ.voxel_size)


def check_cfl(state: SimState, v_r) -> None:
    vmax = max(float(np.sqrt((state.v**2).sum(axis=1)).max(initial=0.0)), float(np.linalg.norm(v_r)))
    if state.dt * vmax > CFL_NUMBER * state.grid.dx:
        raise SimulationError(
            f"CFL violated at step {state.n}: dt * v_max = {state.dt * vmax:.3g} > "
            f"{CFL_NUMBER} * dx = {CFL_NUMBER * state.grid.dx:.3g}",
            step=state.n,
        )


def step(state: SimState, v_r=(0.0, 0.0, 0.0), threads: int = 0) -> SimState:
    """Advance one time step in place and return ``state``.

    ``threads=0`` runs the serial reference path.
    """
    v_r = np.asarray(v_r, dtype=float)
    check_cfl(state, v_r)
    grid = p2g_scatter(state, threads)
    grid_normalize(grid)
    apply_constraints(grid, state.sticky)
    occ, occ_origin, occ_h = _occupancy_arrays(state)
    inv_dx = 1.0 / grid.dx
    particle_affine = state.affine_source == "particle"
    ranges = _chunks(state.n_particles, threads) if threads else [(0, state.n_particles)]
    errs = [np.zeros(2, dtype=np.int64) for _ in ranges]

    def work(i):
        a, b = ranges[i]
        return kernels.g2p(
            state.x, state.v, state.C, state.F, state.alpha, v_r, grid.velocity, grid.lo,
            inv_dx, grid.dx, state.dt, grid.n, particle_affine, occ, occ_origin, occ_h, errs[i], a, b,
        )

    _run(work, len(ranges), threads)
    failures = [e for e in errs if e[1] != kernels.ERR_NONE]
    state.n += 1
    state.hand_offset = state.hand_offset + state.dt * v_r
    if failures:
        err = min(failures, key=lambda e: e[0])
        p = int(err[0])
        if err[1] == kernels.ERR_INVERSION:
            raise ParticleInversionError(
                f"det(F) <= 0 for particle {p} after step {state.n}", particle=p, step=state.n
            )
        raise EscapeError(
            f"particle {p} left the grid margin after step {state.n}", particle=p, step=state.n
        )
    return state


# single-particle reference operations (used as oracles and for inspection)


def g2p_velocity(x_p, grid: Grid, v_r, alpha_p: float) -> np.ndarray:
    """Blend of the grid-gathered velocity and the hand velocity for one particle."""
    if not 0.0 <= alpha_p <= 1.0:
        raise ValueError(f"alpha must lie in [0, 1], got {alpha_p}")
    gathered = _gather(x_p, grid)[0]
    return alpha_p * gathered + (1.0 - alpha_p) * np.asarray(v_r, dtype=float)


def _gather(x_p, grid: Grid):
    base, w, fx = bspline_weights(x_p, grid.dx, grid.n)
    W = stencil_weights(w)
    idx = base + STENCIL - grid.lo
    vel = grid.velocity[idx[:, 0], idx[:, 1], idx[:, 2]]
    d = (STENCIL - fx) * grid.dx
    return W @ vel, W, vel, d


def g2p_update(x_p, v_new, F_p, grid: Grid, dt: float):
    """Return (C, x, F) after one step for a single particle with blended velocity ``v_new``."""
    _, W, vel, d = _gather(x_p, grid)
    C = 4.0 / grid.dx**2 * np.einsum("k,ki,kj->ij", W, vel, d)
    x_new = np.asarray(x_p, dtype=float) + dt * np.asarray(v_new, dtype=float)
    F_new = (np.eye(3) + dt * C) @ np.asarray(F_p, dtype=float)
    if not np.linalg.det(F_new) > 0:
        raise ParticleInversionError("det(F) <= 0 after update")
    if np.any(x_new / grid.dx < 2.0) or np.any(x_new / grid.dx > grid.n - 2.0):
        raise EscapeError("particle left the grid margin")
    return C, x_new, F_new


def stress_term(F_p, params: MaterialParams, gamma: float, offset) -> np.ndarray:
    """-gamma P F^T d for one particle and node offset d (momentum-scatter stress term)."""
    P = pk1_stress(F_p, params)
    return -gamma * P @ np.asarray(F_p, dtype=float).T @ np.asarray(offset, dtype=float)


# checkpoints: little-endian, versioned

_CKPT_MAGIC = b"EIPC"
_CKPT_VERSION = 1


def save_checkpoint(state: SimState, path) -> None:
    header = struct.pack(
        "<4sHIIIddddd",
        _CKPT_MAGIC,
        _CKPT_VERSION,
        state.n_particles,
        state.grid.n,
        state.n,
        state.dt,
        state.gamma,
        state.params.E,
        state.params.nu,
        state.mass_unit,
    )
    arrays = [
        state.x, state.v, state.C, state.F, state.mass, state.volume, state.alpha, state.rest,
        state.hand_offset, state.frame, np.asarray(state.face_size, dtype=float),
    ]
    tmp = f"{path}.tmp"
    with open(tmp, "wb") as fh:
        fh.write(header)
        flags = (1 if state.affine_source == "particle" else 0) | (2 if state.clamp_particles else 0)
        fh.write(struct.pack("<B", flags))
        for a in arrays:
            fh.write(np.ascontiguousarray(a, dtype="<f8").tobytes())
        fh.write(np.ascontiguousarray(state.layer, dtype="<i8").tobytes())
        fh.write(np.ascontiguousarray(state.mass_q, dtype="<i8").tobytes())
    os.replace(tmp, path)


def load_checkpoint(path, occupancy: RigidOccupancy | None = None) -> SimState:
    """Restore a state; the object occupancy is not stored and must be passed again."""
    with open(path, "rb") as fh:
        data = fh.read()
    fmt = "<4sHIIIddddd"
    magic, version, npart, gn, n, dt, gamma, E, nu, unit = struct.unpack_from(fmt, data, 0)
    if magic != _CKPT_MAGIC or version != _CKPT_VERSION:
        raise ValueError(f"{path}: not a version-{_CKPT_VERSION} checkpoint")
    off = struct.calcsize(fmt)
    flags = data[off]
    off += 1

    def take(shape, dtype="<f8"):
        nonlocal off
        count = int(np.prod(shape))
        arr = np.frombuffer(data, dtype=dtype, count=count, offset=off).reshape(shape).copy()
        off += count * 8
        return arr

    x, v = take((npart, 3)), take((npart, 3))
    C, F = take((npart, 3, 3)), take((npart, 3, 3))
    mass, volume, alpha, rest = take((npart,)), take((npart,)), take((npart,)), take((npart, 3))
    hand, frame, face = take((3,)), take((3, 3)), take((2,))
    layer, mass_q = take((npart,), "<i8"), take((npart,), "<i8")
    grid = Grid.for_domain(gn)
    state = SimState(
        x=x, v=v, C=C, F=F, mass=mass, volume=volume, layer=layer, alpha=alpha, rest=rest,
        grid=grid, dt=dt, gamma=gamma, params=MaterialParams(E, nu), mass_unit=unit,
        mass_q=mass_q, occupancy=occupancy, n=n, hand_offset=hand,
        affine_source="particle" if flags & 1 else "grid", clamp_particles=bool(flags & 2), frame=frame,
        face_size=(float(face[0]), float(face[1])),
    )
    if occupancy is not None:
        state.sticky = sticky_nodes(occupancy, grid)
    return state


__all__ = [
    "DEFAULT_DT",
    "MASS_EPSILON",
    "EscapeError",
    "ParticleInversionError",
    "SimState",
    "SimulationError",
    "check_cfl",
    "coefficient_gamma",
    "default_threads",
    "g2p_update",
    "g2p_velocity",
    "load_checkpoint",
    "make_state",
    "p2g_scatter",
    "save_checkpoint",
    "step",
    "stress_term",
]
