"""Outlier-aware split of a cluster's pixel budget among its classes.

Classes whose share is at most ``tau_o * N_avg`` are outliers, where
``tau_o = (1 - tau_ns) * n / (n - 1)``. Outliers get ``max(1, round(h * A_i))``
pixels (``A_i`` is the proportional area, ``h = 1`` for ST1 and
``min(h, h_max)`` for ST2); non-outliers share the rest by largest remainder.

The per-cluster rule lives in one numba kernel so the same code serves the
single-cluster API and the whole-canvas driver.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numba as nb
import numpy as np

PATTERNS = ("ST1", "ST2")


@dataclass(frozen=True)
class ClassSplit:
    budget: int
    per_class: dict
    outlier_flags: dict
    h_used: float
    h_max: float
    warnings: tuple = field(default=())

    @property
    def outliers(self) -> set:
        return {c for c, f in self.outlier_flags.items() if f}


def outlier_threshold(n: int, tau_ns: float) -> float:
    return (1.0 - tau_ns) * n / (n - 1) if n >= 2 else 0.0


def filter_outliers(class_counts: dict, tau_ns: float = 0.5):
    """Return ``(outliers, non_outliers, tau_o)`` for one cluster's class counts."""
    if not 0.5 <= tau_ns <= 1.0:
        raise ValueError("tau_ns must lie in [0.5, 1]")
    ids = sorted(c for c, v in class_counts.items() if v > 0)
    counts = np.array([class_counts[c] for c in ids], dtype=np.int64)
    flags = _outlier_flags(counts, tau_ns)
    out = {c for c, f in zip(ids, flags) if f}
    return out, set(ids) - out, outlier_threshold(len(ids), tau_ns)


def compute_h_max(op, np_) -> float:
    """Largest emphasis that keeps the densest outlier at or below the sparsest non-outlier."""
    op = list(op)
    np_ = list(np_)
    if not op:
        return math.inf
    return min(np_) / (max(op) * sum(np_) + min(np_) * sum(op))


@nb.njit(cache=True)
def _outlier_flags(counts, tau_ns):
    n = len(counts)
    flags = np.zeros(n, dtype=np.bool_)
    if n < 2:
        return flags
    total = counts.sum()
    all_out = True
    for i in range(n):
        flags[i] = counts[i] * (n - 1) <= (1.0 - tau_ns) * total
        all_out &= flags[i]
    if all_out:
        best = 0
        for i in range(1, n):
            if counts[i] > counts[best]:
                best = i
        flags[best] = False
    return flags


@nb.njit(cache=True)
def _largest_remainder(total, weights):
    """Integer apportionment of ``total`` proportional to integer ``weights``; ties to lower index."""
    n = len(weights)
    out = np.zeros(n, dtype=np.int64)
    wsum = weights.sum()
    if wsum == 0 or total == 0:
        return out
    rem = np.empty(n, dtype=np.int64)
    given = 0
    for i in range(n):
        q = total * weights[i]
        out[i] = q // wsum
        rem[i] = q % wsum
        given += out[i]
    order = np.argsort(-rem, kind="mergesort")
    for t in range(total - given):
        out[order[t]] += 1
    return out


@nb.njit(cache=True)
def _split_one(counts, m, tau_ns, st2, h, alloc, flags):
    """Fill ``alloc``/``flags`` for one cluster; returns (h_used, h_max, feasible)."""
    n = len(counts)
    for i in range(n):
        alloc[i] = 0
    f = _outlier_flags(counts, tau_ns)
    total = counts.sum()
    max_op = 0.0
    sum_op = 0.0
    min_np = np.inf
    sum_np = 0.0
    n_out = 0
    for i in range(n):
        flags[i] = f[i]
        p = counts[i] / total
        if f[i]:
            n_out += 1
            sum_op += p
            max_op = max(max_op, p)
        else:
            sum_np += p
            min_np = min(min_np, p)
    h_max = np.inf if n_out == 0 else min_np / (max_op * sum_np + min_np * sum_op)
    h_used = min(h, h_max) if st2 else 1.0
    if m <= 0:
        return h_used, h_max, True
    if m < n:
        # infeasible: one pixel each for the largest classes
        order = np.argsort(-counts, kind="mergesort")
        for t in range(m):
            alloc[order[t]] = 1
        return h_used, h_max, False

    n_non = n - n_out
    on = np.zeros(n, dtype=np.int64)
    on_sum = 0
    for i in range(n):
        if f[i]:
            ha = h_used * (counts[i] * m / total)
            on[i] = 1 if ha < 1.0 else np.int64(math.floor(ha + 0.5))
            on_sum += on[i]
    cap = m - n_non
    if on_sum > cap:
        extra = np.zeros(n_out, dtype=np.int64)
        k = 0
        for i in range(n):
            if f[i]:
                extra[k] = on[i] - 1
                k += 1
        extra = _largest_remainder(cap - n_out, extra)
        k = 0
        on_sum = 0
        for i in range(n):
            if f[i]:
                on[i] = 1 + extra[k]
                on_sum += on[i]
                k += 1

    w = np.zeros(n_non, dtype=np.int64)
    k = 0
    for i in range(n):
        if not f[i]:
            w[k] = counts[i]
            k += 1
    share = _largest_remainder(m - on_sum, w)
    # every non-outlier keeps at least one pixel
    for k in range(n_non):
        if share[k] == 0:
            big = 0
            for t in range(1, n_non):
                if share[t] > share[big]:
                    big = t
            share[big] -= 1
            share[k] = 1
    k = 0
    for i in range(n):
        if f[i]:
            alloc[i] = on[i]
        else:
            alloc[i] = share[k]
            k += 1

    # non-reversal: no outlier above the smallest non-outlier
    if n_out > 0 and n_non > 0:
        while True:
            hi = -1
            lo = -1
            for i in range(n):
                if f[i]:
                    if hi < 0 or alloc[i] > alloc[hi]:
                        hi = i
                elif lo < 0 or alloc[i] < alloc[lo]:
                    lo = i
            if alloc[hi] <= alloc[lo]:
                break
            alloc[hi] -= 1
            alloc[lo] += 1
    return h_used, h_max, True


@nb.njit(cache=True)
def _split_all(offsets, counts, budgets, tau_ns, st2, h):
    n_clusters = len(offsets) - 1
    alloc = np.zeros(len(counts), dtype=np.int64)
    flags = np.zeros(len(counts), dtype=np.bool_)
    h_used = np.zeros(n_clusters)
    h_max = np.zeros(n_clusters)
    feasible = np.ones(n_clusters, dtype=np.bool_)
    for c in range(n_clusters):
        a, b = offsets[c], offsets[c + 1]
        hu, hm, ok = _split_one(counts[a:b], budgets[c], tau_ns, st2, h, alloc[a:b], flags[a:b])
        h_used[c] = hu
        h_max[c] = hm
        feasible[c] = ok
    return alloc, flags, h_used, h_max, feasible


def _check_pattern(pattern, h):
    if pattern not in PATTERNS:
        raise ValueError(f"pattern must be one of {PATTERNS}")
    if pattern == "ST2" and h < 1.0:
        raise ValueError("ST2 needs h >= 1")


def split_budget(class_counts: dict, m: int, pattern: str = "ST2", h: float = 10.0,
                 tau_ns: float = 0.5) -> ClassSplit:
    """Split ``m`` pixels among the classes in ``class_counts`` (class -> point count)."""
    _check_pattern(pattern, h)
    ids = sorted(c for c, v in class_counts.items() if v > 0)
    if not ids:
        raise ValueError("cluster has no points")
    counts = np.array([class_counts[c] for c in ids], dtype=np.int64)
    alloc = np.zeros(len(ids), dtype=np.int64)
    flags = np.zeros(len(ids), dtype=np.bool_)
    hu, hm, ok = _split_one(counts, int(m), float(tau_ns), pattern == "ST2", float(h), alloc, flags)
    warnings = () if ok else (f"budget {m} below class count {len(ids)}",)
    return ClassSplit(int(m), dict(zip(ids, alloc.tolist())), dict(zip(ids, flags.tolist())), hu, hm, warnings)


@dataclass(eq=False)
class Allocation:
    """Sparse (cluster, class) table; entries grouped by cluster, classes ascending."""

    offsets: np.ndarray
    cls: np.ndarray
    points: np.ndarray
    pixels: np.ndarray
    is_outlier: np.ndarray
    h_used: np.ndarray
    h_max: np.ndarray
    feasible: np.ndarray

    def cluster_slice(self, cid: int) -> slice:
        return slice(self.offsets[cid], self.offsets[cid + 1])

    def split(self, cid: int) -> dict:
        s = self.cluster_slice(cid)
        return dict(zip(self.cls[s].tolist(), self.pixels[s].tolist()))

    def dump_csv(self, path) -> None:
        cluster = np.repeat(np.arange(len(self.offsets) - 1), np.diff(self.offsets))
        with open(path, "w") as fh:
            fh.write("cluster_id,class_id,points,pixels,is_outlier,h_max\n")
            for row in zip(cluster.tolist(), self.cls.tolist(), self.points.tolist(), self.pixels.tolist(),
                           self.is_outlier.astype(int).tolist(), self.h_max[cluster].tolist()):
                fh.write("%d,%d,%d,%d,%d,%.10g\n" % row)


def class_table(point_cluster, cls, n_clusters: int, n_class_ids: int):
    """Per-cluster class counts as CSR arrays ``(offsets, class_ids, counts)``."""
    keys, counts = np.unique(point_cluster.astype(np.int64) * n_class_ids + cls, return_counts=True)
    clusters = keys // n_class_ids
    offsets = np.zeros(n_clusters + 1, dtype=np.int64)
    np.cumsum(np.bincount(clusters, minlength=n_clusters), out=offsets[1:])
    return offsets, (keys % n_class_ids).astype(np.int64), counts.astype(np.int64)


def allocate_all(point_cluster, cls, n_class_ids: int, budgets, pattern: str = "ST2",
                 h: float = 10.0, tau_ns: float = 0.5) -> Allocation:
    _check_pattern(pattern, h)
    if not 0.5 <= tau_ns <= 1.0:
        raise ValueError("tau_ns must lie in [0.5, 1]")
    budgets = np.asarray(budgets, dtype=np.int64)
    offsets, ids, counts = class_table(point_cluster, cls, len(budgets), n_class_ids)
    alloc, flags, hu, hm, ok = _split_all(offsets, counts, budgets, float(tau_ns), pattern == "ST2", float(h))
    return Allocation(offsets, ids, counts, alloc, flags, hu, hm, ok)
