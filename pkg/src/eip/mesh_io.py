"""Triangle mesh loading, writing and watertightness checks.

Only ASCII OBJ (``v``/``f`` records) and binary little-endian STL are supported.
"""
from __future__ import annotations

import struct
from collections import Counter
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np


class MeshError(ValueError):
    code = "mesh_error"


class MeshParseError(MeshError):
    code = "parse_error"


class MeshIndexError(MeshError):
    code = "index_out_of_range"


class EmptyMeshError(MeshError):
    code = "empty_mesh"


class DegenerateTriangleError(MeshError):
    code = "degenerate_triangle"


@dataclass(frozen=True)
class TriangleMesh:
    vertices: np.ndarray  # (V, 3) float64
    triangles: np.ndarray  # (T, 3) int64
    bbox: tuple[np.ndarray, np.ndarray] = field(init=False)

    def __post_init__(self):
        v = np.ascontiguousarray(self.vertices, dtype=np.float64)
        t = np.ascontiguousarray(self.triangles, dtype=np.int64)
        if v.ndim != 2 or v.shape[1] != 3 or t.ndim != 2 or t.shape[1] != 3:
            raise MeshParseError("vertices and triangles must be (N, 3) arrays")
        if len(v) == 0 or len(t) == 0:
            raise EmptyMeshError("mesh has no vertices or no triangles")
        if t.min() < 0 or t.max() >= len(v):
            raise MeshIndexError(
                f"triangle index out of range [0, {len(v) - 1}]: min={t.min()} max={t.max()}"
            )
        if np.any((t[:, 0] == t[:, 1]) | (t[:, 1] == t[:, 2]) | (t[:, 0] == t[:, 2])):
            raise DegenerateTriangleError("triangle with repeated vertex index")
        v.setflags(write=False)
        t.setflags(write=False)
        object.__setattr__(self, "vertices", v)
        object.__setattr__(self, "triangles", t)
        object.__setattr__(self, "bbox", (v.min(axis=0), v.max(axis=0)))

    @property
    def n_vertices(self) -> int:
        return len(self.vertices)

    @property
    def n_triangles(self) -> int:
        return len(self.triangles)

    @property
    def extent(self) -> np.ndarray:
        return self.bbox[1] - self.bbox[0]

    def transformed(self, scale: float = 1.0, offset=(0.0, 0.0, 0.0)) -> "TriangleMesh":
        return TriangleMesh(self.vertices * scale + np.asarray(offset, dtype=float), self.triangles)

    def volume(self) -> float:
        """Signed volume from the divergence theorem (positive for outward winding)."""
        a, b, c = (self.vertices[self.triangles[:, k]] for k in range(3))
        return float(np.einsum("ij,ij->i", a, np.cross(b, c)).sum() / 6.0)


def _detect_format(path: Path) -> str:
    suffix = path.suffix.lower()
    if suffix == ".obj":
        return "obj-ascii"
    if suffix == ".stl":
        return "stl-binary"
    raise MeshParseError(f"cannot infer mesh format from extension {suffix!r}")


def load_mesh(path, format: str | None = None) -> TriangleMesh:
    path = Path(path)
    fmt = format or _detect_format(path)
    if fmt == "obj-ascii":
        return _load_obj(path)
    if fmt == "stl-binary":
        return _load_stl(path)
    raise MeshParseError(f"unsupported format {fmt!r}")


def _load_obj(path: Path) -> TriangleMesh:
    vertices, triangles = [], []
    with open(path, "r") as fh:
        for lineno, line in enumerate(fh, 1):
            parts = line.split()
            if not parts:
                continue
            tag = parts[0]
            try:
                if tag == "v":
                    vertices.append([float(p) for p in parts[1:4]])
                    if len(vertices[-1]) != 3:
                        raise ValueError("vertex needs 3 coordinates")
                elif tag == "f":
                    # "f 1/2/3 ..." keeps only the position index; polygons are fanned
                    idx = [int(p.split("/")[0]) for p in parts[1:]]
                    if len(idx) < 3:
                        raise ValueError("face needs at least 3 vertices")
                    idx = [i - 1 if i > 0 else (len(vertices) + i if i < 0 else -1) for i in idx]
                    for k in range(1, len(idx) - 1):
                        triangles.append([idx[0], idx[k], idx[k + 1]])
            except ValueError as exc:
                raise MeshParseError(f"{path}:{lineno}: {exc}") from None
    return TriangleMesh(
        np.asarray(vertices, dtype=float).reshape(-1, 3),
        np.asarray(triangles, dtype=np.int64).reshape(-1, 3),
    )


_STL_RECORD = np.dtype(
    [("normal", "<f4", 3), ("v", "<f4", (3, 3)), ("attr", "<u2")]
)


def _load_stl(path: Path) -> TriangleMesh:
    data = path.read_bytes()
    if len(data) < 84:
        raise MeshParseError(f"{path}: truncated STL header")
    (count,) = struct.unpack_from("<I", data, 80)
    if len(data) != 84 + 50 * count:
        raise MeshParseError(
            f"{path}: expected {84 + 50 * count} bytes for {count} triangles, got {len(data)}"
        )
    records = np.frombuffer(data, dtype=_STL_RECORD, count=count, offset=84)
    corners = records["v"].reshape(-1, 3).astype(np.float64)
    if len(corners) == 0:
        raise EmptyMeshError(f"{path}: STL has no triangles")
    # dedupe on exact bit patterns, first-occurrence order
    keys = np.ascontiguousarray(records["v"].reshape(-1, 3)).view("V12").ravel()
    _, first, inverse = np.unique(keys, return_index=True, return_inverse=True)
    order = np.argsort(first, kind="stable")
    rank = np.empty_like(order)
    rank[order] = np.arange(len(order))
    vertices = corners[first[order]]
    triangles = rank[inverse.ravel()].reshape(-1, 3)
    return TriangleMesh(vertices, triangles)


def save_obj(mesh: TriangleMesh, path) -> None:
    with open(path, "w") as fh:
        for v in mesh.vertices.tolist():  # Python floats: repr round-trips exactly
            fh.write(f"v {v[0]!r} {v[1]!r} {v[2]!r}\n")
        for t in mesh.triangles + 1:
            fh.write(f"f {t[0]} {t[1]} {t[2]}\n")


def save_stl(mesh: TriangleMesh, path) -> None:
    tri = mesh.vertices[mesh.triangles]
    normals = np.cross(tri[:, 1] - tri[:, 0], tri[:, 2] - tri[:, 0])
    lengths = np.linalg.norm(normals, axis=1, keepdims=True)
    normals = np.divide(normals, lengths, out=np.zeros_like(normals), where=lengths > 0)
    records = np.zeros(len(tri), dtype=_STL_RECORD)
    records["normal"] = normals
    records["v"] = tri
    with open(path, "wb") as fh:
        fh.write(b"binary STL written by eip".ljust(80, b"\0"))
        fh.write(struct.pack("<I", len(tri)))
        fh.write(records.tobytes())


def is_watertight(mesh: TriangleMesh) -> bool:
    """Every undirected edge is used by exactly two triangles, once in each direction."""
    t = mesh.triangles
    directed = np.concatenate([t[:, [0, 1]], t[:, [1, 2]], t[:, [2, 0]]])
    counts = Counter(map(tuple, directed.tolist()))
    for (a, b), n in counts.items():
        if n != 1 or counts.get((b, a), 0) != 1:
            return False
    return True
