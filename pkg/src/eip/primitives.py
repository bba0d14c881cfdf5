"""Procedural watertight meshes used as test objects and as the default dataset zoo.

All meshes are outward-wound and roughly centered on the origin.
"""
from __future__ import annotations

import numpy as np

from .mesh_io import TriangleMesh


def box(size=(1.0, 1.0, 1.0), origin=(0.0, 0.0, 0.0)) -> TriangleMesh:
    sx, sy, sz = size
    corners = np.array(
        [[x, y, z] for z in (0, sz) for y in (0, sy) for x in (0, sx)], dtype=float
    ) + np.asarray(origin, dtype=float)
    # corner index = x + 2y + 4z
    quads = [
        (0, 2, 3, 1),  # z = 0, normal -z
        (4, 5, 7, 6),  # z = 1
        (0, 1, 5, 4),  # y = 0
        (2, 6, 7, 3),  # y = 1
        (0, 4, 6, 2),  # x = 0
        (1, 3, 7, 5),  # x = 1
    ]
    tris = []
    for a, b, c, d in quads:
        tris += [(a, b, c), (a, c, d)]
    return TriangleMesh(corners, np.array(tris))


def unit_cube() -> TriangleMesh:
    return box()


def icosphere(radius: float = 1.0, subdivisions: int = 3, center=(0.0, 0.0, 0.0)) -> TriangleMesh:
    t = (1.0 + 5.0 ** 0.5) / 2.0
    verts = [
        (-1, t, 0), (1, t, 0), (-1, -t, 0), (1, -t, 0),
        (0, -1, t), (0, 1, t), (0, -1, -t), (0, 1, -t),
        (t, 0, -1), (t, 0, 1), (-t, 0, -1), (-t, 0, 1),
    ]
    faces = [
        (0, 11, 5), (0, 5, 1), (0, 1, 7), (0, 7, 10), (0, 10, 11),
        (1, 5, 9), (5, 11, 4), (11, 10, 2), (10, 7, 6), (7, 1, 8),
        (3, 9, 4), (3, 4, 2), (3, 2, 6), (3, 6, 8), (3, 8, 9),
        (4, 9, 5), (2, 4, 11), (6, 2, 10), (8, 6, 7), (9, 8, 1),
    ]
    verts = [np.array(v, dtype=float) / np.linalg.norm(v) for v in verts]
    for _ in range(subdivisions):
        cache: dict[tuple[int, int], int] = {}

        def midpoint(a, b):
            key = (min(a, b), max(a, b))
            if key not in cache:
                m = verts[a] + verts[b]
                verts.append(m / np.linalg.norm(m))
                cache[key] = len(verts) - 1
            return cache[key]

        new_faces = []
        for a, b, c in faces:
            ab, bc, ca = midpoint(a, b), midpoint(b, c), midpoint(c, a)
            new_faces += [(a, ab, ca), (b, bc, ab), (c, ca, bc), (ab, bc, ca)]
        faces = new_faces
    v = np.array(verts) * radius + np.asarray(center, dtype=float)
    return TriangleMesh(v, np.array(faces))


def ellipsoid(radii=(1.0, 0.7, 0.5), subdivisions: int = 3) -> TriangleMesh:
    sphere = icosphere(1.0, subdivisions)
    return TriangleMesh(sphere.vertices * np.asarray(radii, dtype=float), sphere.triangles)


def extrude(profile: np.ndarray, height: float) -> TriangleMesh:
    """Prism over a star-shaped CCW polygon ``profile`` (K, 2), centered on z = 0."""
    profile = np.asarray(profile, dtype=float)
    k = len(profile)
    h = height / 2.0
    bottom = np.column_stack([profile, np.full(k, -h)])
    top = np.column_stack([profile, np.full(k, h)])
    centers = np.array([[0.0, 0.0, -h], [0.0, 0.0, h]])
    verts = np.vstack([bottom, top, centers])
    cb, ct = 2 * k, 2 * k + 1
    tris = []
    for i in range(k):
        j = (i + 1) % k
        tris.append((cb, j, i))
        tris.append((ct, k + i, k + j))
        tris.append((i, j, k + j))
        tris.append((i, k + j, k + i))
    return TriangleMesh(verts, np.array(tris))


def cylinder(radius: float = 0.5, height: float = 1.0, segments: int = 48) -> TriangleMesh:
    a = np.linspace(0.0, 2 * np.pi, segments, endpoint=False)
    return extrude(radius * np.column_stack([np.cos(a), np.sin(a)]), height)


def gear(
    outer_radius: float = 0.5,
    inner_radius: float = 0.38,
    teeth: int = 12,
    height: float = 0.3,
    samples_per_tooth: int = 4,
) -> TriangleMesh:
    """Extruded spur-gear-like profile (square teeth)."""
    n = teeth * samples_per_tooth
    a = np.linspace(0.0, 2 * np.pi, n, endpoint=False)
    phase = (np.arange(n) // (samples_per_tooth // 2)) % 2
    r = np.where(phase == 0, outer_radius, inner_radius)
    return extrude(np.column_stack([r * np.cos(a), r * np.sin(a)]), height)


def star_prism(points: int = 5, outer: float = 0.5, inner: float = 0.25, height: float = 0.3):
    a = np.linspace(0.0, 2 * np.pi, 2 * points, endpoint=False)
    r = np.where(np.arange(2 * points) % 2 == 0, outer, inner)
    return extrude(np.column_stack([r * np.cos(a), r * np.sin(a)]), height)


def cone(radius: float = 0.5, height: float = 1.0, segments: int = 48) -> TriangleMesh:
    a = np.linspace(0.0, 2 * np.pi, segments, endpoint=False)
    ring = np.column_stack([radius * np.cos(a), radius * np.sin(a), np.full(segments, -height / 2)])
    verts = np.vstack([ring, [[0, 0, height / 2], [0, 0, -height / 2]]])
    apex, base = segments, segments + 1
    tris = []
    for i in range(segments):
        j = (i + 1) % segments
        tris.append((i, j, apex))
        tris.append((base, j, i))
    return TriangleMesh(verts, np.array(tris))


def torus(major: float = 0.35, minor: float = 0.15, nu: int = 48, nv: int = 24) -> TriangleMesh:
    u = np.linspace(0.0, 2 * np.pi, nu, endpoint=False)
    v = np.linspace(0.0, 2 * np.pi, nv, endpoint=False)
    uu, vv = np.meshgrid(u, v, indexing="ij")
    verts = np.stack(
        [
            (major + minor * np.cos(vv)) * np.cos(uu),
            (major + minor * np.cos(vv)) * np.sin(uu),
            minor * np.sin(vv),
        ],
        axis=-1,
    ).reshape(-1, 3)
    tris = []
    for i in range(nu):
        for j in range(nv):
            a = i * nv + j
            b = ((i + 1) % nu) * nv + j
            c = ((i + 1) % nu) * nv + (j + 1) % nv
            d = i * nv + (j + 1) % nv
            tris += [(a, b, c), (a, c, d)]
    return TriangleMesh(verts, np.array(tris))


def pyramid(base: float = 1.0, height: float = 0.8) -> TriangleMesh:
    h = base / 2
    verts = np.array(
        [[-h, -h, -height / 2], [h, -h, -height / 2], [h, h, -height / 2], [-h, h, -height / 2],
         [0, 0, height / 2]]
    )
    tris = [(0, 2, 1), (0, 3, 2), (0, 1, 4), (1, 2, 4), (2, 3, 4), (3, 0, 4)]
    return TriangleMesh(verts, np.array(tris))


def zoo() -> dict[str, TriangleMesh]:
    """Ten distinct watertight objects, each scaled to unit bounding-box max extent."""
    shapes = {
        "sphere": icosphere(0.5, 3),
        "cube": box(origin=(-0.5, -0.5, -0.5)),
        "cylinder": cylinder(0.4, 0.8),
        "cone": cone(0.5, 0.9),
        "torus": torus(),
        "gear": gear(),
        "star": star_prism(),
        "ellipsoid": ellipsoid((0.5, 0.35, 0.25)),
        "pyramid": pyramid(),
        "hexprism": cylinder(0.45, 0.5, segments=6),
    }
    out = {}
    for name, mesh in shapes.items():
        center = 0.5 * (mesh.bbox[0] + mesh.bbox[1])
        out[name] = mesh.transformed(1.0 / mesh.extent.max(), -center / mesh.extent.max())
    return out
