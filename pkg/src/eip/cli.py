"""Command-line entry points: ``simulate``, ``dataset`` and ``voxelize``.

Progress and diagnostics go to stderr; results go to files (plus the particle
count on stdout for ``voxelize``).
"""
from __future__ import annotations

import argparse
import dataclasses
import logging
import math
import sys
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path

import numpy as np

from .mesh_io import MeshError, is_watertight, load_mesh
from .mpm import SimulationError, default_threads
from .scene import ConfigError, SceneConfig, build_scene, run_scene
from .tactile import write_metadata, write_pgm16, write_tfr
from .voxelize import DEFAULT_DENSITY, VoxelizeError, voxelize_solid, write_ply

log = logging.getLogger("eip")

EXIT_OK = 0
EXIT_CONFIG = 1
EXIT_SIMULATION = 2

RNG_NAME = "PCG64"
MESH_SUFFIXES = {".obj": "obj-ascii", ".stl": "stl-binary"}
DATASET_GRID_NODES = 64


def _error(message: str) -> None:
    print(f"eip: error: {message}", file=sys.stderr)


def _progress(step: int, phase: str) -> None:
    log.info("step %d (%s)", step, phase or "phase")


def simulate(config: SceneConfig, out_dir: Path, threads: int = 0, dump_every: int = 0) -> dict:
    """Run one scene and write ``frame.tfr``, ``frame.pgm`` and ``metadata.json``."""
    out_dir.mkdir(parents=True, exist_ok=True)
    scene = build_scene(config)
    dump_dir = None
    if dump_every:
        dump_dir = out_dir / "dumps"
        dump_dir.mkdir(exist_ok=True)
    result = run_scene(scene, threads=threads, dump_every=dump_every, dump_dir=dump_dir,
                       progress=_progress)
    frame = result.terminal_frame
    write_tfr(frame.data, out_dir / "frame.tfr")
    lo, hi = write_pgm16(frame, out_dir / "frame.pgm")
    meta = dict(frame.metadata)
    meta.update(
        terminal_step=result.terminal_step,
        shape=[frame.H, frame.W, 3],
        normal_range=[lo, hi],
        max_displacement=float(np.linalg.norm(frame.data, axis=2).max()),
        config=config.to_dict(),
    )
    write_metadata(meta, out_dir / "metadata.json")
    return meta


def cmd_simulate(args) -> int:
    try:
        config = SceneConfig.load(args.scene)
        if args.out is not None:
            config.output_dir = str(args.out)
        out_dir = Path(config.output_dir)
        if not out_dir.is_absolute():
            out_dir = Path.cwd() / out_dir
        config.output_dir = str(out_dir)
        threads = 0 if args.serial else default_threads()
        meta = simulate(config, out_dir, threads=threads, dump_every=args.dump_every)
    except ConfigError as exc:
        _error(f"invalid config field {exc.field!r}: {exc}" if exc.field else str(exc))
        return EXIT_CONFIG
    except (MeshError, VoxelizeError) as exc:
        _error(f"invalid config field 'object_mesh': {exc}")
        return EXIT_CONFIG
    except SimulationError as exc:
        _error(f"simulation failed at step {exc.step} (particle {exc.particle}): {exc}")
        return EXIT_SIMULATION
    log.info("terminal step %s, frame written to %s", meta["terminal_step"], out_dir / "frame.tfr")
    return EXIT_OK


def press_plan(object_ids: list[str], presses: int, seed: int,
               speed_range: tuple[float, float]) -> list[dict]:
    """Draw every press up front from one PCG64 stream, in object order.

    Per press: z ~ U(0, 1), phi ~ U(0, 2 pi), speed ~ U(speed_range).  The pad
    starts at the upper-hemisphere point (sqrt(1 - z^2) cos phi, sqrt(1 - z^2) sin phi, z)
    relative to the object and presses towards it, so the press direction is
    the negated point.
    """
    rng = np.random.Generator(np.random.PCG64(seed))
    plan = []
    for oid in object_ids:
        for k in range(presses):
            z = rng.uniform(0.0, 1.0)
            phi = rng.uniform(0.0, 2.0 * math.pi)
            speed = rng.uniform(*speed_range)
            r = math.sqrt(max(0.0, 1.0 - z * z))
            direction = [-r * math.cos(phi), -r * math.sin(phi), -z]
            plan.append({"object_id": oid, "press": k, "direction": direction, "speed": speed})
    return plan


def _press_job(job: dict) -> dict:
    """Simulate one (object, press) pair; never raises."""
    config = SceneConfig.from_dict(job["config"])
    out = Path(job["out_dir"])
    stem = f"press_{job['press']}"
    try:
        scene = build_scene(config)
        result = run_scene(scene, threads=0)
    except (SimulationError, ConfigError, MeshError, VoxelizeError) as exc:
        return {"ok": False, "object_id": job["object_id"], "press": job["press"], "error": str(exc)}
    frame = result.terminal_frame
    write_tfr(frame.data, out / f"{stem}.tfr")
    meta = dict(frame.metadata)
    meta.update(terminal_step=result.terminal_step, press_speed_m_per_s=job["speed"],
                shape=[frame.H, frame.W, 3], config=config.to_dict())
    write_metadata(meta, out / f"{stem}.json")
    return {
        "ok": True,
        "object_id": job["object_id"],
        "press": job["press"],
        "tfr": f"{job['object_id']}/{stem}.tfr",
        "metadata": f"{job['object_id']}/{stem}.json",
        "shape": [frame.H, frame.W, 3],
        "direction": job["direction"],
        "speed": job["speed"],
        "terminal_step": result.terminal_step,
    }


def _object_files(directory: Path) -> list[tuple[str, Path]]:
    files = sorted(p for p in directory.iterdir() if p.suffix.lower() in MESH_SUFFIXES)
    stems = [p.stem for p in files]
    out = []
    for p in files:
        oid = p.stem if stems.count(p.stem) == 1 else p.name.replace(".", "_")
        out.append((oid, p))
    return out


def _base_config(args) -> SceneConfig:
    if args.config is not None:
        return SceneConfig.load(args.config)
    return SceneConfig(grid_nodes=DATASET_GRID_NODES)


def run_dataset(objects_dir: Path, presses: int, seed: int, out_dir: Path,
                base: SceneConfig, speed_range: tuple[float, float], workers: int) -> dict:
    """Generate ``out_dir/<object_id>/press_<k>.tfr`` plus a manifest; returns the manifest."""
    out_dir.mkdir(parents=True, exist_ok=True)
    objects = _object_files(objects_dir)
    plan = press_plan([oid for oid, _ in objects], presses, seed, speed_range)
    paths = dict(objects)
    failures, usable = [], set()
    for oid, path in objects:
        try:
            mesh = load_mesh(path, MESH_SUFFIXES[path.suffix.lower()])
            if not is_watertight(mesh):
                raise MeshError("mesh is not watertight")
        except (MeshError, OSError) as exc:
            log.warning("skipping %s: %s", path.name, exc)
            failures.append({"object_id": oid, "press": None, "error": str(exc)})
            continue
        usable.add(oid)
        (out_dir / oid).mkdir(exist_ok=True)

    jobs = []
    for entry in plan:
        if entry["object_id"] not in usable:
            continue
        config = dataclasses.replace(
            base,
            object_mesh=str(paths[entry["object_id"]].resolve()),
            object_id=entry["object_id"],
            press_direction=tuple(entry["direction"]),
            press_speed_m_per_s=entry["speed"],
            seed=seed,
            output_dir=str(out_dir / entry["object_id"]),
        )
        jobs.append({**entry, "config": config.to_dict(), "out_dir": config.output_dir})

    results = []
    if workers <= 1 or len(jobs) <= 1:
        for job in jobs:
            results.append(_press_job(job))
            log.info("%s press %d done", job["object_id"], job["press"])
    else:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            for job, res in zip(jobs, pool.map(_press_job, jobs)):
                results.append(res)
                log.info("%s press %d done", job["object_id"], job["press"])

    samples = []
    for res in results:
        if res.pop("ok"):
            samples.append(res)
        else:
            log.warning("%s press %d failed: %s", res["object_id"], res["press"], res["error"])
            failures.append(res)
    manifest = {
        "format": "eip-dataset",
        "version": 1,
        "rng": {"name": RNG_NAME, "library": "numpy.random", "seed": seed,
                "draw_order": "per object (sorted by file name), per press: z, phi, speed"},
        "presses_per_object": presses,
        "speed_range_m_per_s": list(speed_range),
        "objects": [oid for oid, _ in objects],
        "samples": samples,
        "failures": failures,
    }
    write_metadata(manifest, out_dir / "manifest.json")
    return manifest


def cmd_dataset(args) -> int:
    objects_dir = Path(args.objects)
    if not objects_dir.is_dir():
        _error(f"objects directory {objects_dir} does not exist")
        return EXIT_CONFIG
    if args.presses < 1:
        _error("--presses must be >= 1")
        return EXIT_CONFIG
    if not 0 < args.speed_min <= args.speed_max:
        _error("speed range must satisfy 0 < --speed-min <= --speed-max")
        return EXIT_CONFIG
    try:
        base = _base_config(args)
    except ConfigError as exc:
        _error(str(exc))
        return EXIT_CONFIG
    workers = args.workers if args.workers is not None else default_threads()
    workers = max(1, min(workers, default_threads()))
    manifest = run_dataset(objects_dir, args.presses, args.seed, Path(args.out), base,
                           (args.speed_min, args.speed_max), workers)
    n = len(manifest["samples"])
    log.info("%d samples written, %d failures", n, len(manifest["failures"]))
    if n == 0:
        _error("every object failed; no samples written")
        return EXIT_SIMULATION
    return EXIT_OK


def cmd_voxelize(args) -> int:
    try:
        mesh = load_mesh(args.mesh)
        particles = voxelize_solid(mesh, args.spacing, density=args.density)
    except (MeshError, VoxelizeError, OSError) as exc:
        _error(str(exc))
        return EXIT_CONFIG
    write_ply(particles, args.out)
    print(len(particles))
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="eip", description="Elastic tactile sensor simulator.")
    parser.add_argument("-q", "--quiet", action="store_true", help="only report errors")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("simulate", help="run one press scene")
    p.add_argument("--scene", required=True, help="scene config (flat JSON)")
    p.add_argument("--out", help="output directory (overrides output_dir)")
    p.add_argument("--dump-every", type=int, default=0, metavar="N",
                   help="write a particle PLY every N steps")
    p.add_argument("--serial", action="store_true", help="single-threaded reference mode")
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("dataset", help="generate randomized presses over a mesh directory")
    p.add_argument("--objects", required=True, help="directory of .obj / .stl meshes")
    p.add_argument("--presses", type=int, required=True, help="presses per object")
    p.add_argument("--seed", type=int, required=True)
    p.add_argument("--out", default="dataset")
    p.add_argument("--config", help="base scene config; mesh, direction and speed are overridden")
    p.add_argument("--speed-min", type=float, default=0.05)
    p.add_argument("--speed-max", type=float, default=0.2)
    p.add_argument("--workers", type=int, help="worker processes (capped by EIP_THREADS)")
    p.set_defaults(func=cmd_dataset)

    p = sub.add_parser("voxelize", help="convert a watertight mesh to a particle PLY")
    p.add_argument("--mesh", required=True)
    p.add_argument("--spacing", type=float, required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--density", type=float, default=DEFAULT_DENSITY)
    p.set_defaults(func=cmd_voxelize)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.WARNING if args.quiet else logging.INFO,
                        format="%(name)s: %(message)s", stream=sys.stderr)
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
