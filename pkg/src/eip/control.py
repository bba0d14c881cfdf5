"""Robot-hand trajectories, blend weights and Chamfer-based terminal checks."""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from numba import njit

BRUTE_FORCE_LIMIT = 5000
DEFAULT_THRESHOLD = 2e-5


@dataclass(frozen=True)
class Phase:
    steps: int
    v_r: tuple[float, float, float]
    until_terminal: bool = False  # leave the phase early once the terminal check fires
    name: str = ""

    def __post_init__(self):
        if self.steps <= 0:
            raise ValueError(f"phase duration must be positive, got {self.steps}")
        object.__setattr__(self, "v_r", tuple(float(c) for c in self.v_r))


@dataclass
class Trajectory:
    phases: list[Phase]
    index: int = 0
    elapsed: int = 0  # steps spent in the current phase

    def __post_init__(self):
        if not self.phases:
            raise ValueError("trajectory needs at least one phase")

    @property
    def done(self) -> bool:
        return self.index >= len(self.phases)

    @property
    def phase(self) -> Phase | None:
        return None if self.done else self.phases[self.index]

    def velocity(self) -> np.ndarray:
        return np.zeros(3) if self.done else np.asarray(self.phase.v_r)

    def advance(self) -> None:
        """Account for one simulated step."""
        if self.done:
            return
        self.elapsed += 1
        if self.elapsed >= self.phase.steps:
            self.next_phase()

    def next_phase(self) -> None:
        self.index += 1
        self.elapsed = 0

    @classmethod
    def grasp(
        cls,
        direction,
        speed: float,
        max_press_steps: int,
        hold_steps: int = 100,
        retract_steps: int | None = None,
        approach_steps: int = 0,
    ) -> "Trajectory":
        """approach -> press until terminal -> hold -> retract along ``-direction``."""
        d = np.asarray(direction, dtype=float)
        d = d / np.linalg.norm(d)
        v = tuple(speed * d)
        phases = []
        if approach_steps:
            phases.append(Phase(approach_steps, v, name="approach"))
        phases.append(Phase(max_press_steps, v, until_terminal=True, name="press"))
        if hold_steps:
            phases.append(Phase(hold_steps, (0.0, 0.0, 0.0), name="hold"))
        if retract_steps is None or retract_steps:
            phases.append(
                Phase(retract_steps or max_press_steps, tuple(-c for c in v), name="retract")
            )
        return cls(phases)


@dataclass(frozen=True)
class TerminalConfig:
    threshold: float = DEFAULT_THRESHOLD  # squared-length units
    interval: int = 1  # steps between checks

    def __post_init__(self):
        if not self.threshold >= 0:
            raise ValueError(f"terminal threshold must be non-negative, got {self.threshold}")
        if self.interval < 1:
            raise ValueError(f"check interval must be >= 1, got {self.interval}")


def alpha_weight(layer: int, layer_count: int) -> float:
    """Linear ramp: 1 on the contact face (layer 0), 0 on the mounting layer."""
    if layer_count < 2:
        raise ValueError(f"need at least two layers, got {layer_count}")
    if not 0 <= layer < layer_count:
        raise ValueError(f"layer {layer} outside [0, {layer_count})")
    return 1.0 - layer / (layer_count - 1)


def alpha_field(layers, layer_count: int | None = None) -> np.ndarray:
    layers = np.asarray(layers)
    count = int(layers.max()) + 1 if layer_count is None else layer_count
    if count < 2:
        raise ValueError(f"need at least two layers, got {count}")
    return 1.0 - layers / (count - 1)


def _centered(points) -> np.ndarray:
    pts = np.asarray(points, dtype=np.float64)
    if pts.ndim == 1:
        pts = pts[:, None]
    if len(pts) == 0:
        raise ValueError("chamfer distance of an empty point set")
    # correctly rounded means keep the result independent of summation order
    mean = np.array([math.fsum(pts[:, k]) / len(pts) for k in range(pts.shape[1])])
    return pts - mean


@njit(nogil=True, cache=True)
def _nearest_brute_kernel(a, b, ab_min, ba_min):
    # squared distance accumulated coordinate by coordinate, in order
    for j in range(b.shape[0]):
        ba_min[j] = np.inf
    for i in range(a.shape[0]):
        best = np.inf
        for j in range(b.shape[0]):
            acc = 0.0
            for k in range(a.shape[1]):
                d = a[i, k] - b[j, k]
                acc += d * d
            if acc < best:
                best = acc
            if acc < ba_min[j]:
                ba_min[j] = acc
        ab_min[i] = best


def _nearest_brute(a, b) -> tuple[np.ndarray, np.ndarray]:
    ab_min = np.empty(len(a))
    ba_min = np.empty(len(b))
    _nearest_brute_kernel(np.ascontiguousarray(a), np.ascontiguousarray(b), ab_min, ba_min)
    return ab_min, ba_min


def _nearest_tree(a, b) -> tuple[np.ndarray, np.ndarray]:
    from scipy.spatial import cKDTree

    def one_way(src, dst):
        _, idx = cKDTree(dst).query(src, k=1)
        diff = src - dst[idx]
        acc = diff[:, 0] * diff[:, 0]
        for k in range(1, src.shape[1]):
            acc = acc + diff[:, k] * diff[:, k]
        return acc

    return one_way(a, b), one_way(b, a)


def chamfer_distance(deformed, rest, method: str = "auto") -> float:
    """Symmetric sum of squared nearest-neighbour distances after mean-centering both sets."""
    a, b = _centered(deformed), _centered(rest)
    if a.shape[1] != b.shape[1]:
        raise ValueError("point sets have different dimensions")
    if method == "auto":
        method = "brute" if max(len(a), len(b)) < BRUTE_FORCE_LIMIT else "tree"
    ab, ba = _nearest_brute(a, b) if method == "brute" else _nearest_tree(a, b)
    return math.fsum(ab) + math.fsum(ba)


def contact_chamfer(state) -> float:
    mask = state.layer == 0
    return chamfer_distance(state.x[mask], state.rest[mask])


@dataclass
class TerminalResult:
    stop: bool
    l: float


def check_terminal(state, config: TerminalConfig) -> TerminalResult:
    """Stop once the contact layer's Chamfer distance to its rest shape exceeds the threshold."""
    if not np.any(state.layer == 0):
        raise ValueError("state has no contact-layer (layer 0) particles")
    l = contact_chamfer(state)
    return TerminalResult(stop=l > config.threshold, l=l)
