"""Cluster footprints, pixel-conflict resolution and CDF density equalization."""
from __future__ import annotations

import logging
from dataclasses import dataclass

import numpy as np

from .dataset import CanvasSpec
from .partition import Cluster, PartitionResult

log = logging.getLogger(__name__)


@dataclass(frozen=True, eq=False)
class ClusterFootprint:
    cluster_id: int
    pixels: np.ndarray  # sorted row-major linear indices
    point_count: int
    n_classes: int

    @property
    def area_px(self) -> int:
        return len(self.pixels)

    @property
    def data_density(self) -> float:
        return self.point_count / self.area_px


@dataclass(frozen=True, eq=False)
class DensityMapping:
    """Area-weighted empirical CDF over region densities (inclusive at each support point)."""

    density: np.ndarray
    weight: np.ndarray
    cdf_values: np.ndarray

    @property
    def total_weight(self) -> int:
        return int(self.weight.sum())

    def __call__(self, d):
        d = np.asarray(d, dtype=np.float64)
        idx = np.searchsorted(self.density, d, side="right") - 1
        out = np.where(idx >= 0, self.cdf_values[np.maximum(idx, 0)], 0.0)
        return out if out.ndim else float(out)


@dataclass(frozen=True)
class PixelBudget:
    cluster_id: int
    visual_density: float
    budget: int


def _cell_pixels(cluster_of_cell, level_of_cell, ix, iy, canvas):
    """Expand cells to (cluster, pixel) pairs; sub-pixel cells collapse onto their pixel."""
    W, H = canvas.width, canvas.height
    fine = level_of_cell >= 0
    shift = np.where(fine, level_of_cell, 0)
    parts_c = [cluster_of_cell[fine]]
    parts_p = [(iy[fine] >> shift[fine]) * W + (ix[fine] >> shift[fine])]
    for lev in np.unique(level_of_cell[~fine]):
        sel = level_of_cell == lev
        s = 1 << int(-lev)
        off = np.arange(s)
        px = (ix[sel] * s)[:, None, None] + off[None, None, :]
        py = (iy[sel] * s)[:, None, None] + off[None, :, None]
        px, py = np.broadcast_arrays(px, py)
        cl = np.broadcast_to(cluster_of_cell[sel][:, None, None], px.shape)
        inside = (px < W) & (py < H)
        parts_c.append(cl[inside])
        parts_p.append(py[inside] * W + px[inside])
    return np.concatenate(parts_c), np.concatenate(parts_p)


def resolve_owners(cluster_of_cell, level_of_cell, ix, iy, n_classes, n_clusters, canvas):
    """Assign each covered pixel to one cluster.

    A pixel covered by several clusters goes to the one with the smallest
    ``area / class_count`` (area before resolution), ties to the lower id.
    Returns the row-major owner array (-1 where uncovered) and the
    pre-resolution areas.
    """
    cl, pix = _cell_pixels(cluster_of_cell, level_of_cell, ix, iy, canvas)
    key = np.unique(cl.astype(np.int64) * canvas.n_pixels + pix)
    cl = key // canvas.n_pixels
    pix = key % canvas.n_pixels
    claimed = np.bincount(cl, minlength=n_clusters)
    ratio = claimed / np.maximum(n_classes, 1)
    order = np.lexsort((cl, ratio[cl], pix))
    pix, cl = pix[order], cl[order]
    win = np.ones(len(pix), dtype=bool)
    win[1:] = pix[1:] != pix[:-1]
    owner = np.full(canvas.n_pixels, -1, dtype=np.int64)
    owner[pix[win]] = cl[win]
    return owner, claimed


@dataclass(eq=False)
class Equalization:
    """Per-cluster footprint and budget arrays produced by :func:`equalize_partition`."""

    canvas: CanvasSpec
    owner: np.ndarray
    claimed_area: np.ndarray
    area: np.ndarray
    point_count: np.ndarray
    n_classes: np.ndarray
    data_density: np.ndarray
    visual_density: np.ndarray
    budget: np.ndarray
    mapping: DensityMapping

    @property
    def dropped(self) -> np.ndarray:
        return self.area == 0

    @property
    def dropped_points(self) -> int:
        return int(self.point_count[self.dropped].sum())

    def footprint(self, cid: int) -> ClusterFootprint:
        return ClusterFootprint(cid, np.flatnonzero(self.owner == cid), int(self.point_count[cid]), int(self.n_classes[cid]))

    def dump_csv(self, path) -> None:
        with open(path, "w") as fh:
            fh.write("cluster_id,area_px,data_density,visual_density,budget\n")
            for cid in np.flatnonzero(~self.dropped).tolist():
                fh.write("%d,%d,%.10g,%.10g,%d\n" % (
                    cid, self.area[cid], self.data_density[cid], self.visual_density[cid], self.budget[cid]))


def classes_per_cluster(point_cluster, cls, n_clusters, n_class_ids):
    pairs = np.unique(point_cluster.astype(np.int64) * n_class_ids + cls)
    return np.bincount(pairs // n_class_ids, minlength=n_clusters)


def equalize_partition(part: PartitionResult, cls, n_class_ids: int, canvas: CanvasSpec) -> Equalization:
    m = part.n_clusters
    ncl = classes_per_cluster(part.point_cluster, cls, m, n_class_ids)
    cell_cluster = np.repeat(np.arange(m), np.diff(part.cell_offsets))
    owner, claimed = resolve_owners(cell_cluster, part.level[cell_cluster], part.cell_ix, part.cell_iy, ncl, m, canvas)
    area = np.bincount(owner[owner >= 0], minlength=m)
    lost = area == 0
    if lost.any():
        log.warning("%d clusters lost their whole footprint to overlap resolution; %d points not drawn",
                    int(lost.sum()), int(part.point_count[lost].sum()))
    kept = ~lost
    density = np.zeros(m)
    density[kept] = part.point_count[kept] / area[kept]
    mapping = build_density_mapping(density[kept], area[kept])
    vd = np.zeros(m)
    vd[kept] = mapping(density[kept])
    budget = np.zeros(m, dtype=np.int64)
    budget[kept] = budget_for(vd[kept], area[kept], part.point_count[kept])
    return Equalization(canvas, owner, claimed, area, part.point_count, ncl, density, vd, budget, mapping)


def rasterize_footprints(clusters: list[Cluster], cls, canvas: CanvasSpec) -> list[ClusterFootprint]:
    """Object-level footprint construction; ``cls`` maps point id to class id."""
    cls = np.asarray(cls)
    cells = [c.cells for c in clusters]
    cell_cluster = np.repeat(np.arange(len(clusters)), [len(c) for c in cells])
    levels = np.repeat(np.array([c.level for c in clusters], dtype=np.int64), [len(c) for c in cells])
    allc = np.concatenate(cells) if cells else np.zeros((0, 2), dtype=np.int64)
    ncl = np.array([len(np.unique(cls[c.point_ids])) for c in clusters], dtype=np.int64)
    owner, _ = resolve_owners(cell_cluster, levels, allc[:, 0], allc[:, 1], ncl, len(clusters), canvas)
    out = []
    for cid, c in enumerate(clusters):
        pix = np.flatnonzero(owner == cid)
        if len(pix) == 0:
            log.warning("cluster %d dropped by overlap resolution (%d points)", cid, len(c))
            continue
        out.append(ClusterFootprint(cid, pix, len(c), int(ncl[cid])))
    return out


def build_density_mapping(density, area=None) -> DensityMapping:
    """Exact weighted CDF: ``cdf(d) = area(density <= d) / total area``.

    Accepts either a list of :class:`ClusterFootprint` or parallel arrays.
    """
    if area is None:
        fps = density
        density = np.array([f.data_density for f in fps])
        area = np.array([f.area_px for f in fps])
    density = np.asarray(density, dtype=np.float64)
    area = np.asarray(area, dtype=np.int64)
    if len(density) == 0:
        raise ValueError("need at least one footprint")
    support, inv = np.unique(density, return_inverse=True)
    weight = np.bincount(inv.ravel(), weights=area, minlength=len(support)).astype(np.int64)
    cum = np.cumsum(weight)
    return DensityMapping(support, weight, cum / cum[-1])


def budget_for(visual_density, area, point_count):
    """Round half up, then clamp to ``[min(1, points), area]``."""
    raw = np.floor(np.asarray(visual_density) * area + 0.5).astype(np.int64)
    lo = np.minimum(1, point_count)
    return np.clip(raw, lo, area)


def assign_budgets(fps: list[ClusterFootprint], mapping: DensityMapping) -> list[PixelBudget]:
    out = []
    for f in fps:
        vd = float(mapping(f.data_density))
        out.append(PixelBudget(f.cluster_id, vd, int(budget_for(vd, f.area_px, f.point_count))))
    return out
