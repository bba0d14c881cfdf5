"""Contact-pixel count of an identical press at several Young's moduli."""
import argparse

import numpy as np

from eip.scene import SceneConfig, build_scene, run_scene


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--moduli", type=float, nargs="+", default=[1.5, 3.0, 6.0])
    ap.add_argument("--grid", type=int, default=64)
    ap.add_argument("--speed", type=float, default=0.3)
    ap.add_argument("--steps", type=int, default=600)
    ap.add_argument("--fraction", type=float, default=0.1, help="contact threshold as a fraction of the max")
    args = ap.parse_args()
    for E in args.moduli:
        cfg = SceneConfig(grid_nodes=args.grid, youngs_modulus=E, press_speed_m_per_s=args.speed,
                          max_press_steps=args.steps, chamfer_threshold=1e9)
        frame = run_scene(build_scene(cfg)).final_frame
        mag = np.linalg.norm(frame.data, axis=2)
        count = int((mag > args.fraction * mag.max()).sum())
        print(f"E {E:6.2f}  contact pixels {count:5d}  mean normal {frame.normal_component().mean():+.4e}")


if __name__ == "__main__":
    main()
