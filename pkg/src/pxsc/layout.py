"""Pixel placement inside cluster footprints.

Two stages per cluster: a greedy initial layout that may stack several
class pixels on one canvas cell, then a median-split kd-tree that spreads
the stack over distinct footprint cells while keeping the order of
placements along each split axis.
"""
from __future__ import annotations

from collections import Counter
from dataclasses import dataclass

import numba as nb
import numpy as np

from .allocate import Allocation
from .equalize import ClusterFootprint, Equalization


class LayoutError(RuntimeError):
    """An internal layout invariant did not hold."""


@dataclass(frozen=True, eq=False)
class InitialLayout:
    pixels: np.ndarray  # linear pixel index per placement, may repeat
    classes: np.ndarray

    def __len__(self):
        return len(self.pixels)

    def depth(self) -> dict:
        return dict(Counter(self.pixels.tolist()))


@dataclass(frozen=True, eq=False)
class PixelLayout:
    """Injective pixel -> class assignment, stored as parallel arrays."""

    pixels: np.ndarray
    classes: np.ndarray

    def __len__(self):
        return len(self.pixels)

    @property
    def assignment(self) -> dict:
        return dict(zip(self.pixels.tolist(), self.classes.tolist()))

    def check_injective(self) -> None:
        if len(np.unique(self.pixels)) != len(self.pixels):
            raise LayoutError("pixel assigned twice")


@nb.njit(cache=True)
def _initial_layout(fp_pix, width, pt_pix, pt_cls, pt_x, pt_y, al_cls, al_n):
    nf = len(fp_pix)
    ne = len(al_cls)
    npt = len(pt_pix)
    m = 0
    for e in range(ne):
        m += al_n[e]
    out_loc = np.empty(m, dtype=np.int64)
    out_cls = np.empty(m, dtype=np.int64)
    if m == 0:
        return out_loc, out_cls

    sx = np.zeros(ne)
    sy = np.zeros(ne)
    sn = np.zeros(ne)
    keys = np.empty(npt, dtype=np.int64)
    k = 0
    for i in range(npt):
        e = np.searchsorted(al_cls, pt_cls[i])
        sx[e] += pt_x[i]
        sy[e] += pt_y[i]
        sn[e] += 1.0
        loc = np.searchsorted(fp_pix, pt_pix[i])
        if loc < nf and fp_pix[loc] == pt_pix[i]:
            keys[k] = e * nf + loc
            k += 1
    keys = np.sort(keys[:k])

    # unique (entry, pixel) pairs with point counts
    u = 0
    uk = np.empty(k, dtype=np.int64)
    uc = np.empty(k, dtype=np.int64)
    for i in range(k):
        if u > 0 and uk[u - 1] == keys[i]:
            uc[u - 1] += 1
        else:
            uk[u] = keys[i]
            uc[u] = 1
            u += 1
    uk = uk[:u]
    uc = uc[:u]

    e_off = np.zeros(ne + 1, dtype=np.int64)
    for i in range(u):
        e_off[uk[i] // nf + 1] += 1
    for e in range(ne):
        e_off[e + 1] += e_off[e]
    # occupied pixels of each entry, densest first, ties to lower pixel index
    occ = np.empty(u, dtype=np.int64)
    for e in range(ne):
        a, b = e_off[e], e_off[e + 1]
        order = np.argsort(-uc[a:b], kind="mergesort")
        for t in range(b - a):
            occ[a + t] = uk[a + order[t]] % nf

    # pixel -> entries occupying it
    p_off = np.zeros(nf + 1, dtype=np.int64)
    for i in range(u):
        p_off[uk[i] % nf + 1] += 1
    for p in range(nf):
        p_off[p + 1] += p_off[p]
    fill = p_off[:-1].copy()
    p_ent = np.empty(u, dtype=np.int64)
    for i in range(u):
        p = uk[i] % nf
        p_ent[fill[p]] = uk[i] // nf
        fill[p] += 1

    placeable = np.empty(ne, dtype=np.int64)
    for e in range(ne):
        placeable[e] = e_off[e + 1] - e_off[e]
    claimed = np.zeros(nf, dtype=np.bool_)
    done = np.zeros(ne, dtype=np.bool_)
    w = 0
    for _ in range(ne):
        best = -1
        for e in range(ne):
            if done[e] or al_n[e] == 0:
                continue
            # lowest urgent index placeable / remaining; ties keep the lower class
            if best < 0 or placeable[e] * al_n[best] < placeable[best] * al_n[e]:
                best = e
        if best < 0:
            break
        done[best] = True
        need = al_n[best]
        start = w
        for t in range(e_off[best], e_off[best + 1]):
            if w - start == need:
                break
            p = occ[t]
            if claimed[p]:
                continue
            claimed[p] = True
            out_loc[w] = p
            out_cls[w] = al_cls[best]
            w += 1
            for q in range(p_off[p], p_off[p + 1]):
                placeable[p_ent[q]] -= 1
        got = w - start
        n_occ = e_off[best + 1] - e_off[best]
        if got == 0 and n_occ > 0:
            # every pixel holding this class is taken: stack on them, densest first
            for t in range(need):
                out_loc[w] = occ[e_off[best] + t % n_occ]
                out_cls[w] = al_cls[best]
                w += 1
        elif got == 0:
            # no point of this class inside the footprint: stack next to its centroid
            cxm = sx[best] / sn[best]
            cym = sy[best] / sn[best]
            anchor = 0
            dbest = np.inf
            for p in range(nf):
                dx = (fp_pix[p] % width) + 0.5 - cxm
                dy = (fp_pix[p] // width) + 0.5 - cym
                d = dx * dx + dy * dy
                if d < dbest:
                    dbest = d
                    anchor = p
            for t in range(need):
                out_loc[w] = anchor
                out_cls[w] = al_cls[best]
                w += 1
        else:
            for t in range(need - got):
                out_loc[w] = out_loc[start + t % got]
                out_cls[w] = al_cls[best]
                w += 1
    return out_loc, out_cls


@nb.njit(cache=True)
def _stable_partition(idx, a, b, flag, tmp):
    """Move entries of ``idx[a:b]`` with ``flag`` set to the front, keeping order."""
    n = 0
    for i in range(a, b):
        if flag[idx[i]]:
            tmp[n] = idx[i]
            n += 1
    for i in range(a, b):
        if not flag[idx[i]]:
            tmp[n] = idx[i]
            n += 1
    for i in range(b - a):
        idx[a + i] = tmp[i]


@nb.njit(cache=True)
def _kd_disperse(cx, cy, qx, qy, qc):
    """Assign each placement ``(qx, qy, qc)`` to a distinct cell ``(cx, cy)``.

    Returns the cell index chosen for every placement.
    """
    nc = len(cx)
    m = len(qx)
    result = np.full(m, -1, dtype=np.int64)
    if m == 0:
        return result
    if m > nc:
        raise ValueError("more placements than cells")
    big = np.int64(1) << 20
    # orders by (x, y) and (y, x); placements also by class
    c_by_x = np.argsort(cx * big + cy, kind="mergesort")
    c_by_y = np.argsort(cy * big + cx, kind="mergesort")
    q_by_x = np.argsort((qx * big + qy) * 65536 + qc, kind="mergesort")
    q_by_y = np.argsort((qy * big + qx) * 65536 + qc, kind="mergesort")
    cflag = np.zeros(nc, dtype=np.bool_)
    qflag = np.zeros(m, dtype=np.bool_)
    tmp = np.empty(max(nc, m), dtype=np.int64)

    stack = np.empty((128, 4), dtype=np.int64)
    top = 0
    stack[0, 0] = 0
    stack[0, 1] = nc
    stack[0, 2] = 0
    stack[0, 3] = m
    top = 1
    while top > 0:
        top -= 1
        c0, c1, p0, p1 = stack[top, 0], stack[top, 1], stack[top, 2], stack[top, 3]
        p = p1 - p0
        c = c1 - c0
        if p == 0:
            continue
        if p == 1:
            q = q_by_x[p0]
            best = -1
            dbest = np.int64(0)
            for i in range(c0, c1):
                j = c_by_x[i]
                dx = cx[j] - qx[q]
                dy = cy[j] - qy[q]
                d = dx * dx + dy * dy
                if best < 0 or d < dbest:
                    best = j
                    dbest = d
            result[q] = best
            continue
        width = cx[c_by_x[c1 - 1]] - cx[c_by_x[c0]]
        height = cy[c_by_y[c1 - 1]] - cy[c_by_y[c0]]
        on_x = width > height
        if on_x:
            ca, cb, qa, qb = c_by_x, c_by_y, q_by_x, q_by_y
            ka, kb, la, lb = cx, cy, qx, qy
        else:
            ca, cb, qa, qb = c_by_y, c_by_x, q_by_y, q_by_x
            ka, kb, la, lb = cy, cx, qy, qx
        c_lo = c // 2
        first_hi = ca[c0 + c_lo]
        ta, tb = ka[first_hi], kb[first_hi]
        p_lo = 0
        for i in range(p0, p1):
            q = qa[i]
            if la[q] < ta or (la[q] == ta and lb[q] < tb):
                p_lo += 1
            else:
                break
        p_lo = max(p_lo, p - (c - c_lo))
        p_lo = min(p_lo, c_lo)

        for i in range(c0, c0 + c_lo):
            cflag[ca[i]] = True
        _stable_partition(cb, c0, c1, cflag, tmp)
        for i in range(c0, c0 + c_lo):
            cflag[ca[i]] = False
        for i in range(p0, p0 + p_lo):
            qflag[qa[i]] = True
        _stable_partition(qb, p0, p1, qflag, tmp)
        for i in range(p0, p0 + p_lo):
            qflag[qa[i]] = False

        stack[top, 0] = c0 + c_lo
        stack[top, 1] = c1
        stack[top, 2] = p0 + p_lo
        stack[top, 3] = p1
        top += 1
        stack[top, 0] = c0
        stack[top, 1] = c0 + c_lo
        stack[top, 2] = p0
        stack[top, 3] = p0 + p_lo
        top += 1
    return result


@nb.njit(cache=True)
def _layout_all(width, fp_off, fp_pix, pt_off, pt_pix, pt_cls, pt_x, pt_y, al_off, al_cls, al_n, out_off):
    n_clusters = len(fp_off) - 1
    out_pix = np.empty(out_off[-1], dtype=np.int64)
    out_cls = np.empty(out_off[-1], dtype=np.int64)
    for c in range(n_clusters):
        o0, o1 = out_off[c], out_off[c + 1]
        if o1 == o0:
            continue
        fp = fp_pix[fp_off[c]:fp_off[c + 1]]
        a, b = pt_off[c], pt_off[c + 1]
        ea, eb = al_off[c], al_off[c + 1]
        loc, cls = _initial_layout(fp, width, pt_pix[a:b], pt_cls[a:b], pt_x[a:b], pt_y[a:b],
                                   al_cls[ea:eb], al_n[ea:eb])
        cx = fp % width
        cy = fp // width
        cell = _kd_disperse(cx, cy, cx[loc], cy[loc], cls)
        for i in range(o1 - o0):
            out_pix[o0 + i] = fp[cell[i]]
            out_cls[o0 + i] = cls[i]
    return out_pix, out_cls


def _as_points(points):
    pts = np.asarray(points, dtype=np.float64).reshape(-1, 3)
    return pts[:, 0], pts[:, 1], pts[:, 2].astype(np.int64)


def initial_layout(fp: ClusterFootprint, per_class: dict, points, width: int) -> InitialLayout:
    """Greedy stacked layout for one cluster.

    ``points`` is an ``(n, 3)`` array of the cluster's ``x, y, class`` rows in
    canvas space; ``per_class`` maps class id to its pixel count.
    """
    x, y, c = _as_points(points)
    ids = np.array(sorted(k for k, v in per_class.items()), dtype=np.int64)
    alloc = np.array([per_class[k] for k in ids.tolist()], dtype=np.int64)
    if alloc.sum() > fp.area_px:
        raise ValueError("budget exceeds footprint area")
    missing = np.setdiff1d(np.unique(c), ids)
    if len(missing):
        ids = np.concatenate([ids, missing])
        alloc = np.concatenate([alloc, np.zeros(len(missing), dtype=np.int64)])
        order = np.argsort(ids)
        ids, alloc = ids[order], alloc[order]
    pix = y.astype(np.int64) * width + x.astype(np.int64)
    loc, cls = _initial_layout(fp.pixels.astype(np.int64), width, pix, c, x, y, ids, alloc)
    return InitialLayout(fp.pixels[loc], cls)


def kd_disperse(init: InitialLayout, fp: ClusterFootprint, width: int) -> PixelLayout:
    cells = fp.pixels.astype(np.int64)
    loc = np.searchsorted(cells, init.pixels)
    if len(init) and (loc.max() >= len(cells) or (cells[loc] != init.pixels).any()):
        raise ValueError("placement outside footprint")
    cx, cy = cells % width, cells // width
    cell = _kd_disperse(cx, cy, cx[loc], cy[loc], init.classes.astype(np.int64))
    return PixelLayout(cells[cell], init.classes.copy())


def assemble(layouts: list[PixelLayout]) -> PixelLayout:
    if not layouts:
        return PixelLayout(np.zeros(0, dtype=np.int64), np.zeros(0, dtype=np.int64))
    out = PixelLayout(np.concatenate([l.pixels for l in layouts]), np.concatenate([l.classes for l in layouts]))
    out.check_injective()
    return out


@dataclass(frozen=True, eq=False)
class CanvasLayout(PixelLayout):
    """Global layout with per-cluster slot offsets into ``pixels``/``classes``."""

    cluster_offsets: np.ndarray = None


def layout_all(eq: Equalization, alloc: Allocation, ps, point_cluster) -> CanvasLayout:
    """Lay out every cluster; ``ps`` is the canvas-space point set used for partitioning."""
    W = eq.canvas.width
    owner = eq.owner
    n_clusters = len(eq.area)
    order = np.argsort(owner, kind="stable")
    n_free = int(np.count_nonzero(owner < 0))
    fp_pix = order[n_free:].astype(np.int64)
    fp_off = np.zeros(n_clusters + 1, dtype=np.int64)
    np.cumsum(eq.area, out=fp_off[1:])

    porder = np.argsort(point_cluster, kind="stable")
    pt_off = np.zeros(n_clusters + 1, dtype=np.int64)
    np.cumsum(eq.point_count, out=pt_off[1:])
    px = np.minimum(ps.x.astype(np.int64), W - 1)
    py = np.minimum(ps.y.astype(np.int64), eq.canvas.height - 1)
    pt_pix = (py * W + px)[porder]

    cluster_of_entry = np.repeat(np.arange(n_clusters), np.diff(alloc.offsets))
    out_off = np.zeros(n_clusters + 1, dtype=np.int64)
    np.cumsum(np.bincount(cluster_of_entry, weights=alloc.pixels, minlength=n_clusters).astype(np.int64),
              out=out_off[1:])
    pix, cls = _layout_all(W, fp_off, fp_pix, pt_off, pt_pix, ps.cls[porder].astype(np.int64),
                           ps.x[porder], ps.y[porder], alloc.offsets, alloc.cls, alloc.pixels, out_off)
    out = CanvasLayout(pix, cls, out_off)
    if np.bincount(pix, minlength=eq.canvas.n_pixels).max(initial=0) > 1:
        raise LayoutError("pixel assigned twice")
    return out

