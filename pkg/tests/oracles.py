"""Slow, independent reference implementations used as test oracles.

Everything here is plain Python (dicts, loops, Fractions) and shares no code
with the package beyond the data it is handed.
"""
from __future__ import annotations

import math
from fractions import Fraction

L_MAX = 6


def exact_kurtosis(counts) -> Fraction:
    n = len(counts)
    if n < 4:
        return Fraction(0)
    s = sum(counts)
    d = [n * c - s for c in counts]
    m2 = sum(v * v for v in d)
    if m2 == 0:
        return Fraction(0)
    return Fraction(n * sum(v**4 for v in d), m2 * m2)


def brute_partition(xs, ys, theta_k, l_init, l_max=L_MAX):
    """Direct transcription of the refinement loop; returns a set of frozensets of point ids."""
    theta = Fraction(theta_k)
    peaked = [list(range(len(xs)))]
    gentle = []
    level = l_init
    while peaked:
        produced = []
        for members in peaked:
            gs = 2.0 ** (-level)
            cells = {}
            for i in members:
                cells.setdefault((math.floor(xs[i] / gs), math.floor(ys[i] / gs)), []).append(i)
            seen = set()
            for start in cells:
                if start in seen:
                    continue
                seen.add(start)
                stack, comp = [start], []
                while stack:
                    u = stack.pop()
                    comp.append(u)
                    for dx in (-1, 0, 1):
                        for dy in (-1, 0, 1):
                            v = (u[0] + dx, u[1] + dy)
                            if v in cells and v not in seen:
                                seen.add(v)
                                stack.append(v)
                pts = [p for c in comp for p in cells[c]]
                produced.append((pts, exact_kurtosis([len(cells[c]) for c in comp])))
        peaked = []
        for pts, k in produced:
            if k > theta and level < l_max:
                peaked.append(pts)
            else:
                gentle.append((level, frozenset(pts)))
        level += 1
    return gentle


def h_max_residual(op, np_, h):
    """|left - right| of the density-reversal balance equation."""
    left = max(op) * h
    right = min(np_) / sum(np_) * (1 - h * sum(op))
    return abs(left - right)


def order_preserving_min_cost(qs, cells):
    """Min total |q - c| over order-preserving injective maps (1D), by DP."""
    qs, cells = sorted(qs), sorted(cells)
    n, m = len(qs), len(cells)
    inf = float("inf")
    dp = [[inf] * (m + 1) for _ in range(n + 1)]
    for j in range(m + 1):
        dp[0][j] = 0
    for i in range(1, n + 1):
        for j in range(1, m + 1):
            dp[i][j] = min(dp[i][j - 1], dp[i - 1][j - 1] + abs(qs[i - 1] - cells[j - 1]))
    return dp[n][m]


def brute_windows(labels, xs, ys, cls, s, k):
    """Per-window dicts by pixel loops: area, covered, colored[class], truth[class]."""
    H, W = len(labels), len(labels[0])
    rows, cols = -(-H // s), -(-W // s)
    win = {(r, c): {"area": 0, "covered": 0, "colored": [0] * k, "truth": [0] * k}
           for r in range(rows) for c in range(cols)}
    for y in range(H):
        for x in range(W):
            w = win[(y // s, x // s)]
            w["area"] += 1
            if labels[y][x] >= 0:
                w["covered"] += 1
                w["colored"][labels[y][x]] += 1
    for x, y, c in zip(xs, ys, cls):
        px, py = min(int(x), W - 1), min(int(y), H - 1)
        win[(py // s, px // s)]["truth"][c] += 1
    return win, rows, cols


def _pairs(rows, cols):
    for r in range(rows):
        for c in range(cols):
            if c + 1 < cols:
                yield (r, c), (r, c + 1)
            if r + 1 < rows:
                yield (r, c), (r + 1, c)


def _score(t1, t2, v1, v2):
    if v1 == v2:
        return 0.5
    return 1.0 if (t1 < t2) == (v1 < v2) else 0.0


def brute_pddr(labels, xs, ys, cls, s, k):
    win, rows, cols = brute_windows(labels, xs, ys, cls, s, k)
    total, n = 0.0, 0
    for a, b in _pairs(rows, cols):
        ta, tb = sum(win[a]["truth"]), sum(win[b]["truth"])
        if ta != tb:
            total += _score(ta, tb, win[a]["covered"], win[b]["covered"])
            n += 1
    return total / n if n else 1.0


def brute_pcdr(labels, xs, ys, cls, s, k):
    win, rows, cols = brute_windows(labels, xs, ys, cls, s, k)
    scores = []
    for w in win.values():
        present = [c for c in range(k) if w["truth"][c] > 0]
        if len(present) < 2:
            continue
        tot, n = 0.0, 0
        for i in range(len(present)):
            for j in range(i + 1, len(present)):
                a, b = present[i], present[j]
                if w["truth"][a] != w["truth"][b]:
                    tot += _score(w["truth"][a], w["truth"][b], w["colored"][a], w["colored"][b])
                    n += 1
        if n:
            scores.append(tot / n)
    return math.fsum(scores) / len(scores) if scores else 1.0


def brute_ecsr(labels, xs, ys, cls, s, k):
    win, _, _ = brute_windows(labels, xs, ys, cls, s, k)
    present = erased = 0
    for w in win.values():
        for c in range(k):
            if w["truth"][c] > 0:
                present += 1
                erased += w["colored"][c] == 0
    return erased / present if present else 0.0


def brute_lvc(labels, s, theta):
    k = max(max(row) for row in labels) + 1
    win, rows, cols = brute_windows(labels, [], [], [], s, max(k, 1))
    total, rn = 0.0, 0
    for a, b in _pairs(rows, cols):
        da = win[a]["covered"] / win[a]["area"]
        db = win[b]["covered"] / win[b]["area"]
        if max(da, db) <= theta:
            continue
        rn += 1
        mean = (da + db) / 2
        total += abs(da - mean) / mean
    return total / rn if rn else 0.0
