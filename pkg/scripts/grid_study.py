"""Mean contact displacement of a fixed-travel sphere press at several grid resolutions."""
import argparse
import time

from eip.scene import SceneConfig, build_scene, run_scene
from eip.tactile import contact_displacements


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--grids", type=int, nargs="+", default=[32, 64, 128])
    ap.add_argument("--object", default="sphere")
    ap.add_argument("--speed", type=float, default=0.3)
    ap.add_argument("--steps", type=int, default=600)
    args = ap.parse_args()
    means = {}
    for n in args.grids:
        t0 = time.perf_counter()
        cfg = SceneConfig(grid_nodes=n, object_mesh=f"builtin:{args.object}", press_speed_m_per_s=args.speed,
                          max_press_steps=args.steps, chamfer_threshold=1e9)
        state = run_scene(build_scene(cfg)).state
        _, d = contact_displacements(state)
        normal = d @ state.frame[2]
        means[n] = normal.mean()
        print(f"grid {n:4d}  particles {state.n_particles:7d}  mean {normal.mean():+.4e}  "
              f"min {normal.min():+.4e}  {time.perf_counter() - t0:.1f} s", flush=True)
    grids = sorted(means)
    for a, b in zip(grids, grids[1:]):
        print(f"|{b} - {a}| = {abs(means[b] - means[a]):.3e}")


if __name__ == "__main__":
    main()
