"""End-to-end pipeline: points -> partition -> budgets -> class split -> layout -> raster."""
from __future__ import annotations

import json
import math
import time
from dataclasses import asdict, dataclass, field, fields

import numpy as np

from .allocate import PATTERNS, Allocation, allocate_all
from .dataset import CanvasSpec, PointSet, normalize
from .equalize import Equalization, equalize_partition
from .layout import CanvasLayout, layout_all
from .partition import L_MAX, PartitionResult, partition_points
from .render import Palette, RasterImage, default_palette, render


def auto_l_init(canvas: CanvasSpec) -> int:
    """-1 at 1000 px, one level coarser per doubling of the larger side; capped at the finest level."""
    v = -1.0 - math.log2(max(canvas.width, canvas.height) / 1000.0)
    return min(int(math.floor(v + 0.5)), L_MAX)


@dataclass
class RunConfig:
    input: str | None = None
    format: str | None = None
    canvas: str = "1000x1000"
    theta_k: float = 10.0
    tau_ns: float = 0.5
    pattern: str = "ST2"
    h: float = 10.0
    l_init: int | None = None  # None means derive from the canvas
    palette: str | None = None
    out: str | None = None
    out_format: str | None = None
    metrics: str | None = None
    metric_window: int | None = None
    dump_clusters: str | None = None
    threads: int | None = None
    margin: float = 0.0
    seed: int = 0  # reserved, the pipeline draws no random numbers

    def validate(self) -> None:
        CanvasSpec.parse(self.canvas)
        if not self.theta_k > 0:
            raise ValueError("theta_k must be positive")
        if not 0.5 <= self.tau_ns <= 1.0:
            raise ValueError("tau_ns must lie in [0.5, 1]")
        if self.pattern not in PATTERNS:
            raise ValueError(f"pattern must be one of {PATTERNS}")
        if self.h < 1.0:
            raise ValueError("h must be >= 1")
        if self.l_init is not None and self.l_init > L_MAX:
            raise ValueError(f"l_init must be <= {L_MAX}")

    @property
    def canvas_spec(self) -> CanvasSpec:
        return CanvasSpec.parse(self.canvas)

    def resolved_l_init(self) -> int:
        return auto_l_init(self.canvas_spec) if self.l_init is None else self.l_init

    def to_json(self) -> str:
        return json.dumps(asdict(self), indent=2, sort_keys=True)

    @classmethod
    def from_json(cls, text: str) -> "RunConfig":
        data = json.loads(text)
        known = {f.name for f in fields(cls)}
        unknown = set(data) - known
        if unknown:
            raise ValueError(f"unknown config keys: {sorted(unknown)}")
        return cls(**data)


@dataclass(eq=False)
class RunResult:
    points: PointSet  # canvas-space
    canvas: CanvasSpec
    partition: PartitionResult
    equalization: Equalization
    allocation: Allocation
    layout: CanvasLayout
    image: RasterImage
    timings: dict = field(default_factory=dict)

    def summary(self) -> dict:
        eq = self.equalization
        return {
            "points": len(self.points),
            "classes": self.points.n_classes,
            "clusters": self.partition.n_clusters,
            "rounds": self.partition.rounds,
            "dropped_clusters": int(eq.dropped.sum()),
            "dropped_points": eq.dropped_points,
            "covered_pixels": int(eq.area.sum()),
            "budget": int(eq.budget.sum()),
            "colored_pixels": self.image.colored,
            "infeasible_clusters": int((~self.allocation.feasible).sum()),
        }


class StageError(RuntimeError):
    def __init__(self, stage, exc):
        super().__init__(f"{stage}: {exc}")
        self.stage = stage


class _Timer:
    def __init__(self, timings):
        self.timings = timings

    def __call__(self, name):
        self.name = name
        return self

    def __enter__(self):
        self.t0 = time.perf_counter()

    def __exit__(self, et, ev, tb):
        self.timings[self.name] = self.timings.get(self.name, 0.0) + time.perf_counter() - self.t0
        if ev is not None and not isinstance(ev, StageError):
            raise StageError(self.name, ev) from ev


def run(points: PointSet, canvas: CanvasSpec, theta_k: float = 10.0, tau_ns: float = 0.5,
        pattern: str = "ST2", h: float = 10.0, l_init: int | None = None,
        palette: Palette | None = None, margin: float = 0.0, timings: dict | None = None) -> RunResult:
    """Run every stage in memory on raw (un-normalized) points."""
    timings = {} if timings is None else timings
    timer = _Timer(timings)
    if l_init is None:
        l_init = auto_l_init(canvas)
    with timer("normalize"):
        ps = normalize(points, canvas, margin)
    with timer("partition"):
        part = partition_points(ps.x, ps.y, theta_k, l_init)
    with timer("equalize"):
        eq = equalize_partition(part, ps.cls, ps.n_classes, canvas)
    with timer("allocate"):
        alloc = allocate_all(part.point_cluster, ps.cls, ps.n_classes, eq.budget, pattern, h, tau_ns)
    with timer("layout"):
        lay = layout_all(eq, alloc, ps, part.point_cluster)
    with timer("render"):
        img = render(lay, canvas, palette or default_palette(ps.n_classes))
    return RunResult(ps, canvas, part, eq, alloc, lay, img, timings)


def metric_window(canvas: CanvasSpec) -> int:
    return max(1, int(round(max(canvas.width, canvas.height) / 10)))


def class_pixel_counts(result: RunResult) -> np.ndarray:
    return np.bincount(result.image.labels[result.image.labels >= 0], minlength=result.points.n_classes)
