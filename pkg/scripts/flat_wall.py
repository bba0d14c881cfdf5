"""Press a pad into a flat wall covering its face and compare the reading with the hand travel."""
import argparse

import numpy as np

from eip.primitives import box
from eip.scene import SceneConfig, build_scene, run_scene


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--grid", type=int, default=128)
    ap.add_argument("--delta", type=float, default=0.02)
    ap.add_argument("--speed", type=float, default=0.1)
    ap.add_argument("--hold", type=int, default=300)
    ap.add_argument("--pad", type=float, default=0.0625, help="pad width, height and thickness")
    args = ap.parse_args()
    dx = 1.0 / args.grid
    h = 0.5 * dx
    # wall top just above a grid-node plane so the outermost sticky nodes lie on the surface
    top = round(0.4 / dx) * dx + 0.01 * h
    wall = box((0.4, 0.4, top - 0.2), (0.3, 0.3, 0.2))
    cfg = SceneConfig(grid_nodes=args.grid, object_center_m=(0.5, 0.5, 0.3), sensor_width_m=args.pad,
                      sensor_height_m=args.pad, sensor_thickness_m=args.pad, press_speed_m_per_s=args.speed,
                      max_press_steps=int(round(args.delta / (args.speed * 1e-4))), hold_steps=args.hold,
                      chamfer_threshold=1e9)
    scene = build_scene(cfg, mesh=wall)
    for arr in (scene.state.x, scene.state.rest):
        arr[:, 2] -= 0.5 * h  # contact-layer centres start on the wall surface
    normal = run_scene(scene).final_frame.normal_component()
    print(f"reading mean {normal.mean():+.5f}  min {normal.min():+.5f}  max {normal.max():+.5f}  "
          f"expected {-args.delta:+.5f}  ratio {normal.mean() / -args.delta:.3f}")


if __name__ == "__main__":
    main()
