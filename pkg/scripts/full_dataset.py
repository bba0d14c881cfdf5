"""Full-scale dataset run: the ten built-in objects, 200 presses each, at a 64^3 grid."""
import argparse
import tempfile
import time
from pathlib import Path

from eip import primitives
from eip.cli import main as eip_main
from eip.mesh_io import save_obj


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--out", default="dataset_full")
    ap.add_argument("--presses", type=int, default=200)
    ap.add_argument("--seed", type=int, default=0)
    ap.add_argument("--workers", type=int)
    args = ap.parse_args()
    with tempfile.TemporaryDirectory() as tmp:
        for name, mesh in primitives.zoo().items():
            save_obj(mesh, Path(tmp) / f"{name}.obj")
        argv = ["dataset", "--objects", tmp, "--presses", str(args.presses), "--seed", str(args.seed),
                "--out", args.out]
        if args.workers:
            argv += ["--workers", str(args.workers)]
        t0 = time.perf_counter()
        code = eip_main(argv)
    print(f"exit {code} after {(time.perf_counter() - t0) / 60:.1f} min")
    return code


if __name__ == "__main__":
    raise SystemExit(main())
