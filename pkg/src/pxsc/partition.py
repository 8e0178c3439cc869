"""Iso-density region partition.

Points are bucketed on a square grid, non-empty cells are merged into
clusters through 3x3 (Chebyshev) adjacency, and clusters whose per-cell
count distribution is too peaked are re-gridded at half the cell size. The
loop stops once every cluster is gentle or the finest level ``L_MAX`` is
reached.

Levels are signed: grid size is ``2**-level`` canvas pixels, so level 0 is
the one-pixel grid and level -1 uses two-pixel cells.
"""
from __future__ import annotations

from collections import Counter
from dataclasses import dataclass
from functools import cached_property

import numpy as np
from scipy.sparse import coo_matrix
from scipy.sparse.csgraph import connected_components

from .dataset import PointSet

L_MAX = 6
_SHIFT = 22
_NEIGHBOR_OFFSETS = ((1 << _SHIFT) - 1, 1 << _SHIFT, (1 << _SHIFT) + 1, 1)


def grid_size(level: int) -> float:
    return 2.0 ** (-level)


@dataclass(frozen=True)
class GridCell:
    level: int
    ix: int
    iy: int
    count: int
    per_class: dict
    point_ids: tuple = ()


@dataclass(frozen=True, eq=False)
class Cluster:
    """A connected set of non-empty cells at one level and the points inside.

    ``cells`` is an ``(k, 2)`` array of ``(ix, iy)`` sorted lexicographically,
    ``cell_counts`` the matching point counts and ``point_ids`` is sorted.
    """

    level: int
    cells: np.ndarray
    cell_counts: np.ndarray
    point_ids: np.ndarray
    kurtosis: float

    @property
    def grid_size(self) -> float:
        return grid_size(self.level)

    def __len__(self):
        return len(self.point_ids)


def kurtosis(counts) -> float:
    """Pearson kurtosis of per-cell counts; 0 below four cells or for zero spread."""
    if isinstance(counts, Cluster):
        counts = counts.cell_counts
    c = np.asarray(counts, dtype=np.float64)
    if len(c) < 4:
        return 0.0
    d = c - c.mean()
    m2 = np.mean(d * d)
    if m2 <= 0.0:
        return 0.0
    return float(np.mean(d**4) / (m2 * m2))


def _kurtosis_by_label(counts, labels, n_labels):
    counts = counts.astype(np.float64)
    n = np.bincount(labels, minlength=n_labels)
    mean = np.bincount(labels, counts, n_labels) / np.maximum(n, 1)
    d = counts - mean[labels]
    d2 = d * d
    m2 = np.bincount(labels, d2, n_labels) / np.maximum(n, 1)
    m4 = np.bincount(labels, d2 * d2, n_labels) / np.maximum(n, 1)
    out = np.zeros(n_labels)
    ok = (n >= 4) & (m2 > 0)
    out[ok] = m4[ok] / (m2[ok] * m2[ok])
    return out


def _cell_coords(x, y, level):
    scale = 2.0**level
    ix = np.floor(x * scale).astype(np.int64)
    iy = np.floor(y * scale).astype(np.int64)
    return ix, iy


def _pack(ix, iy):
    return ((ix + 1) << _SHIFT) | (iy + 1)


def _unpack(keys):
    return (keys >> _SHIFT) - 1, (keys & ((1 << _SHIFT) - 1)) - 1


def _components(keys, group=None):
    """Connected components of sorted cell keys under 3x3 adjacency.

    Cells only join when ``group`` (their parent cluster) matches.
    """
    g = len(keys)
    if g == 0:
        return 0, np.zeros(0, dtype=np.int64)
    src, dst = [], []
    for off in _NEIGHBOR_OFFSETS:
        nk = keys + off
        pos = np.minimum(np.searchsorted(keys, nk), g - 1)
        hit = keys[pos] == nk
        if group is not None:
            hit &= group[pos] == group
        idx = np.flatnonzero(hit)
        src.append(idx)
        dst.append(pos[idx])
    src = np.concatenate(src)
    dst = np.concatenate(dst)
    graph = coo_matrix((np.ones(len(src), dtype=np.int8), (src, dst)), shape=(g, g))
    n, labels = connected_components(graph, directed=False)
    return n, labels.astype(np.int64)


@dataclass(eq=False)
class PartitionResult:
    """Flat array form of a partition, clusters numbered by their smallest point id."""

    point_cluster: np.ndarray
    level: np.ndarray
    kurtosis: np.ndarray
    point_count: np.ndarray
    cell_offsets: np.ndarray
    cell_ix: np.ndarray
    cell_iy: np.ndarray
    cell_count: np.ndarray
    rounds: int
    theta_k: float
    l_init: int
    l_max: int

    @property
    def n_clusters(self) -> int:
        return len(self.level)

    @cached_property
    def _point_order(self):
        order = np.argsort(self.point_cluster, kind="stable")
        offsets = np.zeros(self.n_clusters + 1, dtype=np.int64)
        np.cumsum(self.point_count, out=offsets[1:])
        return order, offsets

    def point_ids(self, cid: int) -> np.ndarray:
        order, off = self._point_order
        return order[off[cid]:off[cid + 1]]

    def cluster(self, cid: int) -> Cluster:
        a, b = self.cell_offsets[cid], self.cell_offsets[cid + 1]
        return Cluster(
            level=int(self.level[cid]),
            cells=np.stack([self.cell_ix[a:b], self.cell_iy[a:b]], axis=1),
            cell_counts=self.cell_count[a:b],
            point_ids=self.point_ids(cid),
            kurtosis=float(self.kurtosis[cid]),
        )

    def clusters(self) -> list[Cluster]:
        return [self.cluster(i) for i in range(self.n_clusters)]

    def dump_csv(self, path) -> None:
        ncells = np.diff(self.cell_offsets)
        with open(path, "w") as fh:
            fh.write("level,cell_count,point_count,kurtosis\n")
            for row in zip(self.level.tolist(), ncells.tolist(), self.point_count.tolist(), self.kurtosis.tolist()):
                fh.write("%d,%d,%d,%.10g\n" % row)


def partition_points(x, y, theta_k: float, l_init: int, l_max: int = L_MAX) -> PartitionResult:
    """Run the refinement loop on canvas-space coordinates."""
    if theta_k <= 0:
        raise ValueError("theta_k must be positive")
    if l_init > l_max:
        raise ValueError(f"l_init={l_init} exceeds the finest level {l_max}")
    x = np.asarray(x, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    n_points = len(x)
    point_cluster = np.empty(n_points, dtype=np.int64)
    active = np.arange(n_points, dtype=np.int64)
    parent = np.zeros(n_points, dtype=np.int64)
    levels, kurts, cell_keys, cell_counts, cell_cluster = [], [], [], [], []
    next_id = 0
    level = l_init
    rounds = 0
    while len(active):
        rounds += 1
        ix, iy = _cell_coords(x[active], y[active], level)
        keys, first, inv = np.unique(_pack(ix, iy), return_index=True, return_inverse=True)
        inv = inv.ravel()
        counts = np.bincount(inv, minlength=len(keys))
        n_comp, comp = _components(keys, parent[first])
        kurt = _kurtosis_by_label(counts, comp, n_comp)
        if level < l_max:
            peaked = kurt > theta_k
        else:
            peaked = np.zeros(n_comp, dtype=bool)
        gentle = ~peaked
        n_gentle = int(gentle.sum())
        gid = np.full(n_comp, -1, dtype=np.int64)
        gid[gentle] = np.arange(next_id, next_id + n_gentle)
        point_comp = comp[inv]
        point_gid = gid[point_comp]
        done = point_gid >= 0
        point_cluster[active[done]] = point_gid[done]
        cell_done = gentle[comp]
        cell_keys.append(keys[cell_done])
        cell_counts.append(counts[cell_done])
        cell_cluster.append(gid[comp[cell_done]])
        levels.append(np.full(n_gentle, level, dtype=np.int64))
        kurts.append(kurt[gentle])
        next_id += n_gentle

        pid = np.full(n_comp, -1, dtype=np.int64)
        pid[peaked] = np.arange(int(peaked.sum()))
        active = active[~done]
        parent = pid[point_comp[~done]]
        level += 1

    levels = np.concatenate(levels)
    kurts = np.concatenate(kurts)
    keys = np.concatenate(cell_keys)
    counts = np.concatenate(cell_counts)
    ccl = np.concatenate(cell_cluster)

    # canonical numbering: by smallest member point id
    _, first_point = np.unique(point_cluster, return_index=True)
    order = np.argsort(first_point, kind="stable")
    rank = np.empty_like(order)
    rank[order] = np.arange(len(order))
    point_cluster = rank[point_cluster]
    ccl = rank[ccl]
    cix, ciy = _unpack(keys)
    cell_order = np.lexsort((ciy, cix, ccl))
    point_count = np.bincount(point_cluster, minlength=len(order))
    offsets = np.zeros(len(order) + 1, dtype=np.int64)
    np.cumsum(np.bincount(ccl, minlength=len(order)), out=offsets[1:])
    return PartitionResult(
        point_cluster=point_cluster,
        level=levels[order],
        kurtosis=kurts[order],
        point_count=point_count,
        cell_offsets=offsets,
        cell_ix=cix[cell_order],
        cell_iy=ciy[cell_order],
        cell_count=counts[cell_order],
        rounds=rounds,
        theta_k=float(theta_k),
        l_init=int(l_init),
        l_max=int(l_max),
    )


def iso_density_partition(ps: PointSet, theta_k: float = 10.0, l_init: int = -1,
                          l_max: int = L_MAX) -> list[Cluster]:
    return partition_points(ps.x, ps.y, theta_k, l_init, l_max).clusters()


def gridding(ps: PointSet, level: int, point_ids=None) -> list[GridCell]:
    """Bucket points into the non-empty cells of the grid at ``level``."""
    ids = np.arange(len(ps)) if point_ids is None else np.asarray(point_ids, dtype=np.int64)
    if len(ids) == 0:
        return []
    ix, iy = _cell_coords(ps.x[ids], ps.y[ids], level)
    buckets: dict[tuple[int, int], list[int]] = {}
    for i, a, b in zip(ids.tolist(), ix.tolist(), iy.tolist()):
        buckets.setdefault((a, b), []).append(i)
    cells = []
    for (a, b), members in sorted(buckets.items()):
        per_class = dict(Counter(ps.cls[members].tolist()))
        cells.append(GridCell(level, a, b, len(members), per_class, tuple(members)))
    return cells


def clustering(cells: list[GridCell]) -> list[Cluster]:
    """Merge cells whose indices are within Chebyshev distance 1."""
    if not cells:
        return []
    level = cells[0].level
    if any(c.level != level for c in cells):
        raise ValueError("cells span several levels")
    cells = sorted(cells, key=lambda c: (c.ix, c.iy))
    keys = _pack(np.array([c.ix for c in cells], dtype=np.int64), np.array([c.iy for c in cells], dtype=np.int64))
    n, labels = _components(keys)
    out = []
    for k in range(n):
        members = [cells[i] for i in np.flatnonzero(labels == k)]
        counts = np.array([c.count for c in members], dtype=np.int64)
        pids = np.sort(np.array([p for c in members for p in c.point_ids], dtype=np.int64))
        out.append(Cluster(
            level=level,
            cells=np.array([(c.ix, c.iy) for c in members], dtype=np.int64),
            cell_counts=counts,
            point_ids=pids,
            kurtosis=kurtosis(counts),
        ))
    out.sort(key=lambda c: (tuple(c.cells[0])))
    return out
