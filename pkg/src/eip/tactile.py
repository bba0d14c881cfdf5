"""Tactile frames from the contact layer, multi-touch stacks and file exports.

Displacements are measured in the hand frame: a contact particle's current
position minus its rest position carried along by the accumulated hand
motion.  A sensor that only translates with the hand therefore reads zero.

Binary tensor format (``.tfr``), little-endian throughout::

    b"EIPT" | u16 version=1 | u32 H | u32 W | u32 C | H*W*C float32 (row-major, channel fastest)
"""
from __future__ import annotations

import json
import os
import struct
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

TFR_MAGIC = b"EIPT"
TFR_VERSION = 1
_TFR_HEADER = "<4sHIII"


class FrameShapeError(ValueError):
    pass


@dataclass
class TactileFrame:
    data: np.ndarray  # (H, W, 3)
    metadata: dict = field(default_factory=dict)
    points: np.ndarray | None = None  # contact-layer positions, for PLY export
    displacements: np.ndarray | None = None

    @property
    def H(self) -> int:
        return self.data.shape[0]

    @property
    def W(self) -> int:
        return self.data.shape[1]

    def normal_component(self) -> np.ndarray:
        """Displacement along the contact normal (negative = pushed into the pad)."""
        n = np.asarray(self.metadata.get("contact_normal", (0.0, 0.0, -1.0)), dtype=float)
        return self.data @ n


@dataclass
class TouchStack:
    frames: list[TactileFrame]
    tensor: np.ndarray  # (H, W, 3 * I)

    def block(self, i: int) -> np.ndarray:
        return self.tensor[:, :, 3 * i : 3 * i + 3]


def contact_displacements(state) -> tuple[np.ndarray, np.ndarray]:
    """(rest positions, hand-frame displacements) of the contact-layer particles."""
    mask = state.layer == 0
    if not np.any(mask):
        raise ValueError("state has no contact-layer (layer 0) particles")
    rest = state.rest[mask]
    return rest, state.x[mask] - (rest + state.hand_offset)


def extract_frame(state, H: int, W: int, metadata: dict | None = None) -> TactileFrame:
    """Mean displacement of contact particles binned by rest position on an H x W face grid.

    Rows run along the pad's second face axis, columns along the first.
    """
    if H < 1 or W < 1:
        raise ValueError(f"frame size must be positive, got {H}x{W}")
    rest, disp = contact_displacements(state)
    u_axis, v_axis, normal = state.frame
    width, height = state.face_size
    if not (width > 0 and height > 0):
        raise ValueError(f"state has no sensor face size (got {state.face_size})")
    center = rest.mean(axis=0)
    u = (rest - center) @ u_axis
    v = (rest - center) @ v_axis
    col = np.clip(np.floor((u / width + 0.5) * W).astype(int), 0, W - 1)
    row = np.clip(np.floor((v / height + 0.5) * H).astype(int), 0, H - 1)
    flat = row * W + col
    counts = np.bincount(flat, minlength=H * W)
    data = np.zeros((H * W, 3))
    for k in range(3):
        data[:, k] = np.bincount(flat, weights=disp[:, k], minlength=H * W)
    filled = counts > 0
    data[filled] /= counts[filled, None]
    meta = {"time_step": int(state.n), "contact_normal": [float(c) for c in normal]}
    meta.update(metadata or {})
    return TactileFrame(data.reshape(H, W, 3), meta, rest + state.hand_offset + disp, disp)


def stack_touches(frames: list[TactileFrame]) -> TouchStack:
    if not frames:
        raise FrameShapeError("need at least one frame to stack")
    H, W = frames[0].H, frames[0].W
    for i, f in enumerate(frames):
        if (f.H, f.W) != (H, W):
            raise FrameShapeError(f"frame {i} is {f.H}x{f.W}, expected {H}x{W}")
    return TouchStack(list(frames), np.concatenate([f.data for f in frames], axis=2))


def _atomic_write(path: Path, payload: bytes) -> None:
    tmp = path.with_name(path.name + ".tmp")
    tmp.write_bytes(payload)
    os.replace(tmp, path)


def write_tfr(tensor: np.ndarray, path) -> None:
    t = np.asarray(tensor)
    if t.ndim == 2:
        t = t[:, :, None]
    H, W, C = t.shape
    header = struct.pack(_TFR_HEADER, TFR_MAGIC, TFR_VERSION, H, W, C)
    _atomic_write(Path(path), header + np.ascontiguousarray(t, dtype="<f4").tobytes())


def read_tfr(path) -> np.ndarray:
    data = Path(path).read_bytes()
    size = struct.calcsize(_TFR_HEADER)
    if len(data) < size:
        raise ValueError(f"{path}: truncated tfr header")
    magic, version, H, W, C = struct.unpack_from(_TFR_HEADER, data, 0)
    if magic != TFR_MAGIC or version != TFR_VERSION:
        raise ValueError(f"{path}: not a version-{TFR_VERSION} tfr file")
    if len(data) != size + 4 * H * W * C:
        raise ValueError(f"{path}: payload size does not match {H}x{W}x{C}")
    return np.frombuffer(data, dtype="<f4", offset=size).reshape(H, W, C).copy()


def write_pgm16(frame: TactileFrame, path) -> tuple[float, float]:
    """16-bit binary PGM of the normal component, linearly mapped over [min, max].

    The range goes to a ``<path>.range.txt`` sidecar; a constant frame maps to 0.
    """
    z = frame.normal_component()
    lo, hi = float(z.min()), float(z.max())
    if hi > lo:
        img = np.rint((z - lo) / (hi - lo) * 65535.0)
    else:
        img = np.zeros_like(z)
    header = f"P5\n{frame.W} {frame.H}\n65535\n".encode()
    _atomic_write(Path(path), header + img.astype(">u2").tobytes())
    Path(str(path) + ".range.txt").write_text(f"min {lo!r}\nmax {hi!r}\n")
    return lo, hi


def read_pgm16(path) -> np.ndarray:
    data = Path(path).read_bytes()
    parts = data.split(b"\n", 3)
    W, H = (int(p) for p in parts[1].split())
    return np.frombuffer(parts[3], dtype=">u2").reshape(H, W).astype(np.int64)


def write_frame_ply(frame: TactileFrame, path) -> None:
    if frame.points is None:
        raise ValueError("frame carries no particle cloud")
    lines = [
        "ply", "format ascii 1.0", f"element vertex {len(frame.points)}",
        "property double x", "property double y", "property double z",
        "property double dx", "property double dy", "property double dz", "end_header",
    ]
    for p, d in zip(frame.points, frame.displacements):
        lines.append(" ".join(repr(float(c)) for c in (*p, *d)))
    _atomic_write(Path(path), ("\n".join(lines) + "\n").encode())


def write_metadata(metadata: dict, path) -> None:
    _atomic_write(Path(path), (json.dumps(metadata, indent=2, sort_keys=True) + "\n").encode())


def export_frame(frame: TactileFrame, path, format: str = "tfr") -> Path:
    path = Path(path)
    if format == "tfr":
        write_tfr(frame.data, path)
    elif format == "pgm16":
        write_pgm16(frame, path)
    elif format == "ply":
        write_frame_ply(frame, path)
    else:
        raise ValueError(f"unknown export format {format!r}")
    return path
