"""Scene configuration and the press/hold/retract simulation loop."""
from __future__ import annotations

import dataclasses
import json
import logging
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import primitives
from .control import Phase, TerminalConfig, Trajectory, alpha_field, check_terminal
from .material import MaterialParams
from .mesh_io import TriangleMesh, load_mesh
from .mpm import SimState, make_state, step
from .tactile import TactileFrame, extract_frame
from .voxelize import build_occupancy, pad_frame, seed_sensor_pad, write_ply

log = logging.getLogger(__name__)

BUILTIN_PREFIX = "builtin:"


class ConfigError(ValueError):
    def __init__(self, message: str, field: str | None = None):
        super().__init__(message)
        self.field = field


@dataclass
class SceneConfig:
    object_mesh: str = "builtin:sphere"
    object_id: str = ""
    object_center_m: tuple[float, float, float] = (0.5, 0.5, 0.35)
    object_size_m: float = 0.2
    sensor_width_m: float = 0.25
    sensor_height_m: float = 0.25
    sensor_thickness_m: float = 0.0625
    sensor_gap_m: float = 0.0
    press_direction: tuple[float, float, float] = (0.0, 0.0, -1.0)
    frame_height_px: int = 0  # 0: one pixel per contact particle row
    frame_width_px: int = 0
    youngs_modulus: float = 3.0
    poisson_ratio: float = 0.25
    density_kg_per_m3: float = 1.0
    grid_nodes: int = 128
    dt_seconds: float = 1e-4
    press_speed_m_per_s: float = 0.1
    max_press_steps: int = 3000
    hold_steps: int = 0
    retract_steps: int = 0
    chamfer_threshold: float = 2e-5
    check_interval_steps: int = 1
    affine_source: str = "grid"
    output_dir: str = "out"
    seed: int = 0

    def __post_init__(self):
        self.object_center_m = tuple(float(c) for c in self.object_center_m)
        self.press_direction = tuple(float(c) for c in self.press_direction)

    @property
    def spacing(self) -> float:
        """Particle spacing: half the grid spacing (8 particles per cell)."""
        return 0.5 / self.grid_nodes

    def validate(self, check_files: bool = True) -> "SceneConfig":
        def need(cond, name, msg):
            if not cond:
                raise ConfigError(f"{name}: {msg} (got {getattr(self, name)!r})", field=name)

        need(self.youngs_modulus > 0, "youngs_modulus", "must be positive")
        need(-1.0 < self.poisson_ratio < 0.5, "poisson_ratio", "must lie in (-1, 0.5)")
        need(self.density_kg_per_m3 > 0, "density_kg_per_m3", "must be positive")
        need(isinstance(self.grid_nodes, int) and 16 <= self.grid_nodes <= 1024, "grid_nodes",
             "must be an integer in [16, 1024]")
        need(0 < self.dt_seconds <= 1e-2, "dt_seconds", "must lie in (0, 1e-2]")
        need(self.object_size_m > 0, "object_size_m", "must be positive")
        need(len(self.object_center_m) == 3, "object_center_m", "must have 3 components")
        need(len(self.press_direction) == 3 and np.linalg.norm(self.press_direction) > 0,
             "press_direction", "must be a non-zero 3-vector")
        need(self.press_speed_m_per_s > 0, "press_speed_m_per_s", "must be positive")
        need(
            self.dt_seconds * self.press_speed_m_per_s <= 0.4 / self.grid_nodes,
            "press_speed_m_per_s", "violates the CFL bound dt * v <= 0.4 dx",
        )
        for name in ("sensor_width_m", "sensor_height_m", "sensor_thickness_m"):
            value = getattr(self, name)
            k = value / self.spacing
            need(value > 0 and abs(k - round(k)) < 1e-6 * max(k, 1.0), name,
                 f"must be a positive multiple of the particle spacing {self.spacing!r}")
        need(round(self.sensor_thickness_m / self.spacing) >= 2, "sensor_thickness_m",
             "must span at least two particle layers")
        need(self.sensor_gap_m >= 0, "sensor_gap_m", "must be non-negative")
        need(self.max_press_steps >= 1, "max_press_steps", "must be >= 1")
        need(self.hold_steps >= 0, "hold_steps", "must be >= 0")
        need(self.retract_steps >= 0, "retract_steps", "must be >= 0")
        need(self.chamfer_threshold >= 0, "chamfer_threshold", "must be non-negative")
        need(self.check_interval_steps >= 1, "check_interval_steps", "must be >= 1")
        need(self.frame_height_px >= 0 and self.frame_width_px >= 0, "frame_height_px",
             "must be >= 0")
        need(self.affine_source in ("grid", "particle"), "affine_source", "must be 'grid' or 'particle'")
        if check_files and not self.object_mesh.startswith(BUILTIN_PREFIX):
            need(Path(self.object_mesh).is_file(), "object_mesh", "file does not exist")
        if self.object_mesh.startswith(BUILTIN_PREFIX):
            need(self.object_mesh[len(BUILTIN_PREFIX):] in primitives.zoo(), "object_mesh",
                 f"unknown builtin; choose from {sorted(primitives.zoo())}")
        return self

    @property
    def frame_shape(self) -> tuple[int, int]:
        H = self.frame_height_px or int(round(self.sensor_height_m / self.spacing))
        W = self.frame_width_px or int(round(self.sensor_width_m / self.spacing))
        return H, W

    def to_dict(self) -> dict:
        d = dataclasses.asdict(self)
        d["object_center_m"] = list(self.object_center_m)
        d["press_direction"] = list(self.press_direction)
        return d

    @classmethod
    def from_dict(cls, data: dict, base_dir: Path | None = None) -> "SceneConfig":
        known = {f.name for f in dataclasses.fields(cls)}
        unknown = sorted(set(data) - known)
        if unknown:
            raise ConfigError(f"unknown config keys: {', '.join(unknown)}", field=unknown[0])
        data = dict(data)
        mesh = data.get("object_mesh")
        if base_dir is not None and mesh and not mesh.startswith(BUILTIN_PREFIX):
            p = Path(mesh)
            data["object_mesh"] = str(p if p.is_absolute() else (base_dir / p))
        try:
            return cls(**data)
        except (TypeError, ValueError) as exc:
            raise ConfigError(f"invalid config: {exc}") from None

    @classmethod
    def load(cls, path) -> "SceneConfig":
        path = Path(path)
        try:
            data = json.loads(path.read_text())
        except (OSError, json.JSONDecodeError) as exc:
            raise ConfigError(f"cannot read config {path}: {exc}") from None
        if not isinstance(data, dict):
            raise ConfigError(f"{path}: config must be a JSON object")
        return cls.from_dict(data, base_dir=path.parent).validate()


def load_object(config: SceneConfig) -> TriangleMesh:
    if config.object_mesh.startswith(BUILTIN_PREFIX):
        mesh = primitives.zoo()[config.object_mesh[len(BUILTIN_PREFIX):]]
    else:
        mesh = load_mesh(config.object_mesh)
    center = 0.5 * (mesh.bbox[0] + mesh.bbox[1])
    scale = config.object_size_m / float(mesh.extent.max())
    return mesh.transformed(scale, np.asarray(config.object_center_m) - center * scale)


def object_id(config: SceneConfig) -> str:
    if config.object_id:
        return config.object_id
    if config.object_mesh.startswith(BUILTIN_PREFIX):
        return config.object_mesh[len(BUILTIN_PREFIX):]
    return Path(config.object_mesh).stem


@dataclass
class Scene:
    config: SceneConfig
    state: SimState
    trajectory: Trajectory
    terminal: TerminalConfig
    mesh: TriangleMesh


def build_scene(config: SceneConfig, mesh: TriangleMesh | None = None) -> Scene:
    config.validate(check_files=mesh is None)
    mesh = load_object(config) if mesh is None else mesh
    h = config.spacing
    d = np.asarray(config.press_direction, dtype=float)
    d /= np.linalg.norm(d)
    # occupancy lattice aligned so grid nodes sit on voxel centers
    occupancy = build_occupancy(mesh, h, origin=np.full(3, -0.5 * h))
    pad = seed_sensor_pad(
        config.sensor_width_m, config.sensor_height_m, config.sensor_thickness_m, h,
        contact_normal=d, density=config.density_kg_per_m3,
    )
    center = np.asarray(config.object_center_m)
    reach = float(np.max((mesh.vertices - center) @ d * -1.0))
    face_center = center - d * (reach + config.sensor_gap_m)
    pad.positions = pad.positions + face_center - d * (config.sensor_thickness_m / 2)
    frame = pad_frame(d)
    v0 = config.press_speed_m_per_s * d
    state = make_state(
        pad,
        config.grid_nodes,
        MaterialParams(config.youngs_modulus, config.poisson_ratio),
        dt=config.dt_seconds,
        alpha=alpha_field(pad.layer),
        velocity=v0,
        occupancy=occupancy,
        affine_source=config.affine_source,
        frame=frame,
        face_size=(config.sensor_width_m, config.sensor_height_m),
    )
    phases = [Phase(config.max_press_steps, tuple(v0), until_terminal=True, name="press")]
    if config.hold_steps:
        phases.append(Phase(config.hold_steps, (0.0, 0.0, 0.0), name="hold"))
    if config.retract_steps:
        phases.append(Phase(config.retract_steps, tuple(-v0), name="retract"))
    terminal = TerminalConfig(config.chamfer_threshold, config.check_interval_steps)
    return Scene(config, state, Trajectory(phases), terminal, mesh)


@dataclass
class RunResult:
    state: SimState
    terminal_step: int | None
    terminal_frame: TactileFrame
    final_frame: TactileFrame
    l_series: list[tuple[int, float]] = field(default_factory=list)
    mean_normal: list[tuple[int, float]] = field(default_factory=list)
    peak_max: float = 0.0  # largest per-pixel displacement magnitude seen at checks

    @property
    def frame(self) -> TactileFrame:
        return self.terminal_frame


def frame_metadata(config: SceneConfig, state: SimState, l: float | None) -> dict:
    return {
        "object_id": object_id(config),
        "press_direction": list(config.press_direction),
        "youngs_modulus": config.youngs_modulus,
        "poisson_ratio": config.poisson_ratio,
        "dt_seconds": config.dt_seconds,
        "steps": int(state.n),
        "chamfer_l": None if l is None else float(l),
    }


def run_scene(
    scene: Scene,
    threads: int = 0,
    dump_every: int = 0,
    dump_dir: Path | None = None,
    record_every: int = 0,
    progress=None,
) -> RunResult:
    """Step until the trajectory is exhausted.

    The terminal check runs during ``until_terminal`` phases; when it fires the
    frame is captured and the trajectory moves on to its next phase.
    ``progress(step, phase_name)`` is called every 100 steps when given.
    """
    config, state, traj = scene.config, scene.state, scene.trajectory
    H, W = config.frame_shape
    l_series, mean_normal = [], []
    terminal_step, terminal_frame, last_l = None, None, None
    peak = 0.0
    while not traj.done:
        phase = traj.phase
        step(state, traj.velocity(), threads)
        if progress is not None and state.n % 100 == 0:
            progress(state.n, phase.name)
        if dump_every and dump_dir is not None and state.n % dump_every == 0:
            dump_state_ply(state, Path(dump_dir) / f"step_{state.n:06d}.ply")
        checking = phase.until_terminal and terminal_step is None
        if checking and state.n % scene.terminal.interval == 0:
            res = check_terminal(state, scene.terminal)
            last_l = res.l
            l_series.append((state.n, res.l))
            if res.stop:
                terminal_step = state.n
                terminal_frame = extract_frame(state, H, W, frame_metadata(config, state, res.l))
                log.info("terminal at step %d (l=%.4g)", state.n, res.l)
                traj.next_phase()
                continue
        if record_every and state.n % record_every == 0:
            f = extract_frame(state, H, W)
            mean_normal.append((state.n, float(f.normal_component().mean())))
            peak = max(peak, float(np.linalg.norm(f.data, axis=2).max()))
        traj.advance()
    final = extract_frame(state, H, W, frame_metadata(config, state, last_l))
    if terminal_frame is None:
        terminal_frame = final
    peak = max(peak, float(np.linalg.norm(terminal_frame.data, axis=2).max()))
    return RunResult(state, terminal_step, terminal_frame, final, l_series, mean_normal, peak)


def dump_state_ply(state: SimState, path: Path) -> None:
    from .voxelize import ParticleSet, SENSOR

    ps = ParticleSet(state.x, state.mass, state.volume, state.layer,
                     np.full(state.n_particles, SENSOR), math.nan)
    write_ply(ps, path)
