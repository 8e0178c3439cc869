"""Command line entry point.

``pxsc run`` (the default when the first argument is a flag) renders a point
file; ``pxsc metrics`` scores an existing image against its points;
``pxsc synth`` writes the synthetic fixtures.
"""
from __future__ import annotations

import argparse
import logging
import os
import sys
import time
from pathlib import Path

import numpy as np

from . import synth
from .dataset import CanvasSpec, DatasetError, load_points, normalize, save_points
from .metrics import LvcParams, all_metrics, window_grid
from .pipeline import RunConfig, StageError, metric_window, run
from .render import decode_labels, default_palette, encode, from_labels, load_palette

log = logging.getLogger("pxsc")


def _out_format(path, explicit):
    if explicit:
        return explicit
    return "png" if str(path).lower().endswith(".png") else "ppm"


def _set_threads(cfg_threads):
    env = os.environ.get("PXSC_THREADS")
    n = int(env) if env else cfg_threads
    if n:
        import numba

        numba.set_num_threads(min(int(n), numba.config.NUMBA_NUM_THREADS))


def write_metrics(path, values: dict) -> None:
    with open(path, "w") as fh:
        fh.write("metric,value\n")
        for k, v in values.items():
            fh.write(f"{k},{v:.10g}\n")


def run_pipeline(cfg: RunConfig) -> int:
    """Execute a full run from a config; returns the process exit status."""
    t_start = time.perf_counter()
    timings: dict[str, float] = {}
    stage = "config"
    try:
        cfg.validate()
        _set_threads(cfg.threads)
        canvas = cfg.canvas_spec
        stage = "load"
        t0 = time.perf_counter()
        ps = load_points(cfg.input, cfg.format)
        palette = load_palette(cfg.palette, ps.class_names) if cfg.palette else default_palette(ps.n_classes)
        timings["load"] = time.perf_counter() - t0
        result = run(ps, canvas, cfg.theta_k, cfg.tau_ns, cfg.pattern, cfg.h, cfg.resolved_l_init(),
                     palette, cfg.margin, timings)
        if cfg.out:
            stage = "write"
            t0 = time.perf_counter()
            encode(result.image, _out_format(cfg.out, cfg.out_format), cfg.out)
            timings["write"] = time.perf_counter() - t0
        if cfg.dump_clusters:
            stage = "dump"
            t0 = time.perf_counter()
            d = Path(cfg.dump_clusters)
            d.mkdir(parents=True, exist_ok=True)
            result.partition.dump_csv(d / "partition.csv")
            result.equalization.dump_csv(d / "equalize.csv")
            result.allocation.dump_csv(d / "allocate.csv")
            timings["dump"] = time.perf_counter() - t0
        if cfg.metrics:
            stage = "metrics"
            t0 = time.perf_counter()
            window = cfg.metric_window or metric_window(canvas)
            write_metrics(cfg.metrics, all_metrics(result.image, result.points, window))
            timings["metrics"] = time.perf_counter() - t0
    except StageError as exc:
        print(f"pxsc: stage {exc}", file=sys.stderr)
        return 3
    except (DatasetError, OSError, ValueError) as exc:
        print(f"pxsc: stage {stage}: {exc}", file=sys.stderr)
        return 2
    wall = time.perf_counter() - t_start
    for name, sec in timings.items():
        print(f"time {name:<10s} {sec * 1000:10.1f} ms", file=sys.stderr)
    print(f"time {'total':<10s} {wall * 1000:10.1f} ms (stages {sum(timings.values()) * 1000:.1f} ms)",
          file=sys.stderr)
    for k, v in result.summary().items():
        print(f"{k}: {v}", file=sys.stderr)
    return 0


def _add_run_args(p):
    p.add_argument("--config", help="JSON config; explicit flags override it")
    p.add_argument("--save-config", help="write the effective config as JSON")
    p.add_argument("--input")
    p.add_argument("--format", choices=["csv", "tsv", "binary-f32"])
    p.add_argument("--canvas", help="WxH, e.g. 1000x1000")
    p.add_argument("--theta-k", type=float, dest="theta_k")
    p.add_argument("--tau-ns", type=float, dest="tau_ns")
    p.add_argument("--pattern", choices=["ST1", "ST2"])
    p.add_argument("--h", type=float)
    p.add_argument("--l-init", dest="l_init", help="integer level or AUTO")
    p.add_argument("--palette")
    p.add_argument("--out")
    p.add_argument("--out-format", dest="out_format", choices=["ppm", "png"])
    p.add_argument("--metrics", help="write metric,value CSV here")
    p.add_argument("--metric-window", type=int, dest="metric_window")
    p.add_argument("--dump-clusters", dest="dump_clusters", help="directory for per-stage debug CSVs")
    p.add_argument("--threads", type=int)
    p.add_argument("--margin", type=float)
    p.add_argument("--seed", type=int)


def config_from_args(ns) -> RunConfig:
    cfg = RunConfig.from_json(Path(ns.config).read_text()) if ns.config else RunConfig()
    for name in ("input", "format", "canvas", "theta_k", "tau_ns", "pattern", "h", "palette", "out",
                 "out_format", "metrics", "metric_window", "dump_clusters", "threads", "margin", "seed"):
        v = getattr(ns, name)
        if v is not None:
            setattr(cfg, name, v)
    if ns.l_init is not None:
        cfg.l_init = None if ns.l_init.upper() == "AUTO" else int(ns.l_init)
    return cfg


def _cmd_run(ns) -> int:
    try:
        cfg = config_from_args(ns)
    except (ValueError, OSError) as exc:
        print(f"pxsc: config: {exc}", file=sys.stderr)
        return 2
    if ns.save_config:
        Path(ns.save_config).write_text(cfg.to_json())
    if not cfg.input:
        print("pxsc: config: --input is required", file=sys.stderr)
        return 2
    return run_pipeline(cfg)


def _cmd_metrics(ns) -> int:
    try:
        ps = load_points(ns.input, ns.format)
        palette = load_palette(ns.palette, ps.class_names) if ns.palette else default_palette(ps.n_classes)
        labels = decode_labels(ns.image, palette)
        canvas = CanvasSpec(labels.shape[1], labels.shape[0])
        pts = normalize(ps, canvas, ns.margin)
        img = from_labels(labels, palette)
        window = ns.window or metric_window(canvas)
        values = all_metrics(img, pts, window, LvcParams(ns.lvc_window, ns.theta_grey))
    except (DatasetError, OSError, ValueError) as exc:
        print(f"pxsc: metrics: {exc}", file=sys.stderr)
        return 2
    out = open(ns.out, "w") if ns.out else sys.stdout
    try:
        out.write("metric,value\n")
        for k, v in values.items():
            out.write(f"{k},{v:.10g}\n")
    finally:
        if ns.out:
            out.close()
    if ns.per_window:
        g = window_grid(img, window, pts)
        with open(ns.per_window, "w") as fh:
            fh.write("row,col,area,covered,points,classes_present,classes_colored\n")
            for r in range(g.area.shape[0]):
                for c in range(g.area.shape[1]):
                    fh.write("%d,%d,%d,%d,%d,%d,%d\n" % (
                        r, c, g.area[r, c], g.covered[r, c], g.truth[r, c].sum(),
                        np.count_nonzero(g.truth[r, c]), np.count_nonzero(g.colored[r, c])))
    return 0


def _cmd_synth(ns) -> int:
    if ns.kind == "gmm":
        ps = synth.gaussian_mixture(ns.n, ns.classes, seed=ns.seed)
    elif ns.kind == "hdr":
        ps = synth.hdr_fixture(seed=ns.seed)
    else:
        ps = synth.demo_fixture()
    save_points(ps, ns.out, ns.format)
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="pxsc", description="Pixelated abstraction of multiclass scatterplots")
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command")
    _add_run_args(sub.add_parser("run", help="render a point file"))

    m = sub.add_parser("metrics", help="score a rendered image against its points")
    m.add_argument("--input", required=True)
    m.add_argument("--format", choices=["csv", "tsv", "binary-f32"])
    m.add_argument("--image", required=True)
    m.add_argument("--palette")
    m.add_argument("--margin", type=float, default=0.0)
    m.add_argument("--window", type=int, help="sliding window for pddr/pcdr/ecsr (default: canvas/10)")
    m.add_argument("--lvc-window", type=int, default=10, dest="lvc_window")
    m.add_argument("--theta-grey", type=float, default=0.3, dest="theta_grey")
    m.add_argument("--out")
    m.add_argument("--per-window", dest="per_window")

    s = sub.add_parser("synth", help="write a synthetic dataset")
    s.add_argument("--kind", choices=["gmm", "hdr", "demo"], default="demo")
    s.add_argument("--n", type=int, default=10_000)
    s.add_argument("--classes", type=int, default=5)
    s.add_argument("--seed", type=int, default=0)
    s.add_argument("--format", choices=["csv", "tsv", "binary-f32"], default="csv")
    s.add_argument("--out", required=True)
    return parser


def main(argv=None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    if argv and argv[0].startswith("--") and argv[0] not in ("--help", "--verbose"):
        argv.insert(0, "run")
    parser = build_parser()
    ns = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if ns.verbose else logging.WARNING, format="pxsc: %(message)s")
    if ns.command == "run":
        return _cmd_run(ns)
    if ns.command == "metrics":
        return _cmd_metrics(ns)
    if ns.command == "synth":
        return _cmd_synth(ns)
    parser.print_help()
    return 2


if __name__ == "__main__":
    sys.exit(main())
