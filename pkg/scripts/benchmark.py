"""Time the full pipeline on synthetic Gaussian mixtures.

    python3 scripts/benchmark.py --sizes 100000 1000000 --classes 100 --canvas 1200x1200
"""
import argparse
import time

from pxsc.dataset import CanvasSpec
from pxsc.pipeline import run
from pxsc.synth import gaussian_mixture


def main():
    ap = argparse.ArgumentParser(description=__doc__, formatter_class=argparse.RawDescriptionHelpFormatter)
    ap.add_argument("--sizes", type=int, nargs="+", default=[100_000, 1_000_000])
    ap.add_argument("--classes", type=int, default=100)
    ap.add_argument("--canvas", default="1200x1200")
    ap.add_argument("--repeat", type=int, default=3)
    ap.add_argument("--seed", type=int, default=0)
    args = ap.parse_args()
    canvas = CanvasSpec.parse(args.canvas)

    t0 = time.perf_counter()
    run(gaussian_mixture(2000, 4, seed=args.seed), CanvasSpec(128, 128))
    print(f"warm-up (includes JIT on a cold cache): {time.perf_counter() - t0:.2f} s")

    for n in args.sizes:
        ps = gaussian_mixture(n, args.classes, seed=args.seed)
        best, stages = float("inf"), {}
        for _ in range(args.repeat):
            timings = {}
            t0 = time.perf_counter()
            res = run(ps, canvas, timings=timings)
            wall = time.perf_counter() - t0
            if wall < best:
                best, stages = wall, timings
        detail = "  ".join(f"{k}={v * 1000:.0f}ms" for k, v in stages.items())
        print(f"n={n:>9,d} classes={args.classes} canvas={args.canvas} clusters={res.partition.n_clusters:>6d} "
              f"best={best:.3f} s  [{detail}]")


if __name__ == "__main__":
    main()
