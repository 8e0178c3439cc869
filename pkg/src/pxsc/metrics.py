"""Window-based quality metrics for a raster abstraction.

``lvc`` is the legible visual contrast between 4-neighbouring windows.
``pddr``, ``pcdr`` and ``ecsr`` are order/presence statistics comparing the
raster with the ground-truth points per window. They are reconstructions:
the reference definitions live in earlier sampling literature and may differ
in normalization.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .dataset import PointSet
from .render import RasterImage


@dataclass(frozen=True)
class LvcParams:
    window_size: int = 10
    theta_grey: float = 0.3

    def __post_init__(self):
        if self.window_size < 1:
            raise ValueError("window_size must be >= 1")
        if not 0.0 < self.theta_grey <= 1.0:
            raise ValueError("theta_grey must lie in (0, 1]")


@dataclass(frozen=True, eq=False)
class WindowGrid:
    """Per-window statistics; arrays are indexed ``[window_row, window_col]``."""

    window_size: int
    area: np.ndarray
    covered: np.ndarray
    colored: np.ndarray | None = None  # (rows, cols, K) colored pixels per class
    truth: np.ndarray | None = None  # (rows, cols, K) ground-truth points per class

    @property
    def density(self) -> np.ndarray:
        return self.covered / self.area


def _labels(img) -> np.ndarray:
    return img.labels if isinstance(img, RasterImage) else np.asarray(img)


def window_grid(img, window_size: int, points: PointSet | None = None, n_classes: int | None = None) -> WindowGrid:
    labels = _labels(img)
    H, W = labels.shape
    s = int(window_size)
    rows, cols = -(-H // s), -(-W // s)
    yy, xx = np.divmod(np.arange(H * W), W)
    win = (yy // s) * cols + (xx // s)
    flat = labels.ravel()
    area = np.bincount(win, minlength=rows * cols).reshape(rows, cols)
    covered = np.bincount(win[flat >= 0], minlength=rows * cols).reshape(rows, cols)
    colored = truth = None
    if points is not None or n_classes is not None:
        k = n_classes if n_classes is not None else points.n_classes
        if flat.max(initial=-1) >= k:
            k = int(flat.max()) + 1
        on = flat >= 0
        colored = np.bincount(win[on] * k + flat[on], minlength=rows * cols * k).reshape(rows, cols, k)
        if points is not None:
            px = np.clip(points.x.astype(np.int64), 0, W - 1)
            py = np.clip(points.y.astype(np.int64), 0, H - 1)
            pw = (py // s) * cols + (px // s)
            truth = np.bincount(pw * k + points.cls, minlength=rows * cols * k).reshape(rows, cols, k)
    return WindowGrid(s, area, covered, colored, truth)


def visual_density(window) -> float:
    """Colored fraction of a label window (-1 marks background)."""
    w = np.asarray(window)
    return float(np.count_nonzero(w >= 0) / w.size)


def _neighbor_pairs(a: np.ndarray):
    """Unordered 4-neighbour pairs of a 2D array, horizontal then vertical."""
    return (np.concatenate([a[:, :-1].ravel(), a[:-1, :].ravel()]),
            np.concatenate([a[:, 1:].ravel(), a[1:, :].ravel()]))


def lvc_from_density(density: np.ndarray, theta_grey: float = 0.3) -> float:
    a, b = _neighbor_pairs(np.asarray(density, dtype=np.float64))
    seen = np.maximum(a, b) > theta_grey
    if not seen.any():
        return 0.0
    a, b = a[seen], b[seen]
    mean = (a + b) / 2.0
    return float(np.sum(np.abs(a - mean) / mean) / seen.sum())


def lvc(img, params: LvcParams = LvcParams()) -> float:
    g = window_grid(img, params.window_size)
    return lvc_from_density(g.density, params.theta_grey)


def _order_score(truth_diff, vis_diff):
    agree = np.sign(truth_diff) == np.sign(vis_diff)
    return np.where(vis_diff == 0, 0.5, agree.astype(float))


def pddr(img, points: PointSet, window_size: int) -> float:
    """Share of neighbouring window pairs whose point-count order survives in colored-pixel counts."""
    g = window_grid(img, window_size, points)
    ta, tb = _neighbor_pairs(g.truth.sum(axis=2))
    va, vb = _neighbor_pairs(g.covered)
    keep = ta != tb
    if not keep.any():
        return 1.0
    return float(_order_score(ta[keep] - tb[keep], va[keep] - vb[keep]).mean())


def pcdr(img, points: PointSet, window_size: int) -> float:
    """Mean over windows of the share of class pairs whose count order survives."""
    g = window_grid(img, window_size, points)
    truth = g.truth.reshape(-1, g.truth.shape[2])
    colored = g.colored.reshape(-1, g.colored.shape[2])
    present = truth > 0
    scores = []
    for w in np.flatnonzero(present.sum(axis=1) >= 2):
        cls = np.flatnonzero(present[w])
        t = truth[w, cls]
        v = colored[w, cls]
        i, j = np.triu_indices(len(cls), k=1)
        keep = t[i] != t[j]
        if keep.any():
            scores.append(float(_order_score(t[i][keep] - t[j][keep], v[i][keep] - v[j][keep]).mean()))
    return math.fsum(scores) / len(scores) if scores else 1.0


def ecsr(img, points: PointSet, window_size: int) -> float:
    """Share of (window, class) pairs with ground-truth points but no colored pixel."""
    g = window_grid(img, window_size, points)
    present = g.truth > 0
    if not present.any():
        return 0.0
    return float(np.count_nonzero(present & (g.colored == 0)) / np.count_nonzero(present))


def all_metrics(img, points: PointSet, window_size: int, params: LvcParams = LvcParams()) -> dict:
    return {
        "lvc": lvc(img, params),
        "pddr": pddr(img, points, window_size),
        "pcdr": pcdr(img, points, window_size),
        "ecsr": ecsr(img, points, window_size),
    }
