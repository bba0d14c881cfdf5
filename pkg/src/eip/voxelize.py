"""Solid voxelization of watertight meshes and layered sensor-pad seeding.

Interior classification casts a ray along +x from every voxel center and counts
crossings with the mesh (odd = inside).  Rays that graze an edge or vertex in
the y-z projection are nudged by a fixed fraction of the bounding-box diagonal
so the result is deterministic.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .mesh_io import MeshError, TriangleMesh, is_watertight

SENSOR = 0
OBJECT = 1
DEFAULT_DENSITY = 1000.0
PERTURB_FRACTION = 1e-9
GOLDEN_ANGLE = math.pi * (3.0 - math.sqrt(5.0))


class VoxelizeError(ValueError):
    pass


@dataclass
class ParticleSet:
    positions: np.ndarray  # (N, 3) rest positions
    mass: np.ndarray  # (N,)
    volume: np.ndarray  # (N,) initial volume V_p^0
    layer: np.ndarray  # (N,) int, 0 = contact face
    body: np.ndarray  # (N,) int, SENSOR or OBJECT
    spacing: float

    def __len__(self) -> int:
        return len(self.positions)

    @property
    def layer_count(self) -> int:
        return int(self.layer.max()) + 1 if len(self.layer) else 0


@dataclass(frozen=True)
class RigidOccupancy:
    origin: np.ndarray  # corner of voxel (0, 0, 0)
    voxel_size: float
    occupied: np.ndarray  # (nx, ny, nz) bool

    @property
    def count(self) -> int:
        return int(self.occupied.sum())

    def centers(self) -> np.ndarray:
        """Occupied voxel centers in z-major scan order (x fastest)."""
        ijk = np.argwhere(self.occupied.transpose(2, 1, 0))[:, ::-1]
        return self.origin + (ijk + 0.5) * self.voxel_size

    def contains(self, points) -> np.ndarray:
        pts = np.atleast_2d(np.asarray(points, dtype=float))
        idx = np.floor((pts - self.origin) / self.voxel_size).astype(np.int64)
        shape = np.array(self.occupied.shape)
        valid = np.all((idx >= 0) & (idx < shape), axis=1)
        out = np.zeros(len(pts), dtype=bool)
        i = idx[valid]
        out[valid] = self.occupied[i[:, 0], i[:, 1], i[:, 2]]
        return out


def _crossings(mesh: TriangleMesh, ys, zs, xs_per_row, eps) -> list[np.ndarray]:
    """Parity-inside flags for each row (y, z) of query points ``xs_per_row``."""
    tri = mesh.vertices[mesh.triangles]  # (T, 3, 3)
    ty, tz = tri[:, :, 1], tri[:, :, 2]
    ymin, ymax = ty.min(1), ty.max(1)
    zmin, zmax = tz.min(1), tz.max(1)
    results = []
    for y0, z0, xs in zip(ys, zs, xs_per_row):
        for attempt in range(8):
            # deterministic nudges of growing length, each in a new direction (golden-angle
            # turns), so a nudge cannot keep sliding along one mesh edge
            y = y0 + attempt * eps * math.cos(attempt * GOLDEN_ANGLE)
            z = z0 + attempt * eps * math.sin(attempt * GOLDEN_ANGLE)
            cand = np.nonzero((ymin <= y) & (y <= ymax) & (zmin <= z) & (z <= zmax))[0]
            t = tri[cand]
            a, b, c = t[:, 0], t[:, 1], t[:, 2]

            def edge(p, q):
                return (q[:, 1] - p[:, 1]) * (z - p[:, 2]) - (q[:, 2] - p[:, 2]) * (y - p[:, 1])

            def near(e, p, q):
                # within a small fraction of the nudge length of the edge line
                length = np.hypot(q[:, 1] - p[:, 1], q[:, 2] - p[:, 2])
                return np.abs(e) <= np.maximum(np.abs(area) * 1e-12, 1e-3 * eps * length)

            e0, e1, e2 = edge(a, b), edge(b, c), edge(c, a)
            area = e0 + e1 + e2
            nondegenerate = area != 0.0
            grazing = nondegenerate & (near(e0, a, b) | near(e1, b, c) | near(e2, c, a))
            inside = nondegenerate & (
                ((e0 > 0) & (e1 > 0) & (e2 > 0)) | ((e0 < 0) & (e1 < 0) & (e2 < 0))
            )
            if grazing.any() and attempt < 7:
                continue
            break
        w0, w1, w2 = e1[inside] / area[inside], e2[inside] / area[inside], e0[inside] / area[inside]
        hit_x = w0 * a[inside, 0] + w1 * b[inside, 0] + w2 * c[inside, 0]
        # strict comparison: a hit exactly at the query point is not counted
        counts = (hit_x[None, :] > xs[:, None]).sum(axis=1)
        results.append(counts % 2 == 1)
    return results


def _check_mesh(mesh: TriangleMesh, spacing: float) -> None:
    if not spacing > 0:
        raise VoxelizeError(f"spacing must be positive, got {spacing}")
    if not is_watertight(mesh):
        raise MeshError("mesh is not watertight; solid voxelization needs a closed surface")


def build_occupancy(mesh: TriangleMesh, voxel_size: float, origin=None) -> RigidOccupancy:
    """Voxel occupancy of a watertight mesh.

    The voxel lattice starts at the mesh bounding-box minimum unless ``origin`` is
    given (callers align it with a simulation grid that way).
    """
    _check_mesh(mesh, voxel_size)
    lo, hi = mesh.bbox
    if origin is None:
        origin = lo.copy()
    else:
        origin = np.asarray(origin, dtype=float)
        origin = origin + np.floor((lo - origin) / voxel_size) * voxel_size
    shape = np.maximum(np.ceil((hi - origin) / voxel_size - 1e-12).astype(int), 1)
    occupied = np.zeros(tuple(shape), dtype=bool)
    xs = origin[0] + (np.arange(shape[0]) + 0.5) * voxel_size
    jj, kk = np.meshgrid(np.arange(shape[1]), np.arange(shape[2]), indexing="ij")
    ys = origin[1] + (jj.ravel() + 0.5) * voxel_size
    zs = origin[2] + (kk.ravel() + 0.5) * voxel_size
    eps = PERTURB_FRACTION * float(np.linalg.norm(hi - lo))
    rows = _crossings(mesh, ys, zs, [xs] * len(ys), eps)
    for j, k, inside in zip(jj.ravel(), kk.ravel(), rows):
        occupied[:, j, k] = inside
    return RigidOccupancy(origin, float(voxel_size), occupied)


def voxelize_solid(
    mesh: TriangleMesh, spacing: float, density: float = DEFAULT_DENSITY, body: int = OBJECT
) -> ParticleSet:
    """One particle per interior voxel center, z-major order."""
    _check_mesh(mesh, spacing)
    if spacing >= mesh.extent.min():
        raise VoxelizeError(
            f"spacing {spacing} is not smaller than the mesh's minimum extent "
            f"{mesh.extent.min():.6g}; voxelization would produce zero particles"
        )
    occ = build_occupancy(mesh, spacing)
    pos = occ.centers()
    if len(pos) == 0:
        raise VoxelizeError("voxelization produced zero particles; reduce the spacing")
    n = len(pos)
    vol = np.full(n, spacing**3)
    return ParticleSet(pos, density * vol, vol, np.zeros(n, dtype=np.int64), np.full(n, body), spacing)


def pad_frame(contact_normal) -> np.ndarray:
    """Orthonormal rows (u, v, n) with n = contact_normal; axis-aligned when n is."""
    n = np.asarray(contact_normal, dtype=float)
    norm = np.linalg.norm(n)
    if not np.isclose(norm, 1.0, atol=1e-9):
        raise VoxelizeError(f"contact_normal must be a unit vector, got norm {norm}")
    n = n / norm
    # pick the world axis least aligned with n as the seed for u
    axis = np.eye(3)[int(np.argmin(np.abs(n)))]
    u = axis - np.dot(axis, n) * n
    u /= np.linalg.norm(u)
    v = np.cross(n, u)
    return np.stack([u, v, n])


def _steps(length: float, spacing: float, name: str) -> int:
    k = length / spacing
    r = int(round(k))
    if r < 1 or abs(k - r) > 1e-9 * max(1.0, k):
        raise VoxelizeError(f"{name}={length} is not a positive multiple of spacing={spacing}")
    return r


def seed_sensor_pad(
    width: float,
    height: float,
    thickness: float,
    spacing: float,
    contact_normal=(0.0, 0.0, -1.0),
    density: float = DEFAULT_DENSITY,
) -> ParticleSet:
    """Block of particles centered on the origin, layered away from the contact face.

    ``width`` runs along the first frame axis of :func:`pad_frame`, ``height``
    along the second, ``thickness`` along ``contact_normal``.  Layer 0 is the
    face that points along ``contact_normal``.
    """
    nu = _steps(width, spacing, "width")
    nv = _steps(height, spacing, "height")
    nl = _steps(thickness, spacing, "thickness")
    frame = pad_frame(contact_normal)
    layer, jv, iu = np.meshgrid(np.arange(nl), np.arange(nv), np.arange(nu), indexing="ij")
    layer, jv, iu = layer.ravel(), jv.ravel(), iu.ravel()
    u = (iu + 0.5) * spacing - width / 2
    v = (jv + 0.5) * spacing - height / 2
    d = thickness / 2 - (layer + 0.5) * spacing  # signed offset along the normal
    pos = u[:, None] * frame[0] + v[:, None] * frame[1] + d[:, None] * frame[2]
    n = len(pos)
    vol = np.full(n, spacing**3)
    return ParticleSet(pos, density * vol, vol, layer.astype(np.int64), np.full(n, SENSOR), spacing)


def write_ply(particles: ParticleSet, path, positions=None) -> None:
    """ASCII PLY with per-vertex ``x y z layer body``."""
    pos = particles.positions if positions is None else positions
    with open(path, "w") as fh:
        fh.write("ply\nformat ascii 1.0\n")
        fh.write(f"element vertex {len(pos)}\n")
        fh.write("property double x\nproperty double y\nproperty double z\n")
        fh.write("property int layer\nproperty int body\nend_header\n")
        for p, layer, body in zip(np.asarray(pos).tolist(), particles.layer, particles.body):
            fh.write(f"{p[0]!r} {p[1]!r} {p[2]!r} {int(layer)} {int(body)}\n")


def read_ply(path) -> tuple[np.ndarray, np.ndarray]:
    """Return (positions, extra integer/float columns) from an ASCII PLY written here."""
    with open(path) as fh:
        lines = fh.read().splitlines()
    end = lines.index("end_header")
    count = next(int(l.split()[-1]) for l in lines[:end] if l.startswith("element vertex"))
    rows = np.array([l.split() for l in lines[end + 1 : end + 1 + count]], dtype=float).reshape(count, -1)
    return rows[:, :3], rows[:, 3:]
