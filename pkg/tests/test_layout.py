import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from oracles import order_preserving_min_cost
from pxsc.dataset import CanvasSpec, PointSet
from pxsc.equalize import ClusterFootprint
from pxsc.layout import (InitialLayout, LayoutError, PixelLayout, assemble, initial_layout, kd_disperse,
                         layout_all)
from pxsc.pipeline import run

W = 16


def fp_of(pixels, n_points=1, n_classes=1):
    return ClusterFootprint(0, np.array(sorted(pixels), dtype=np.int64), n_points, n_classes)


def pts_at(pixels_and_classes):
    """Points at pixel centres: list of (linear pixel, class)."""
    return np.array([((p % W) + 0.5, (p // W) + 0.5, c) for p, c in pixels_and_classes], dtype=float)


def test_identity_placement():
    fp = fp_of(range(20))
    pts = pts_at([(3, 0), (7, 0), (7, 0), (12, 0)])
    init = initial_layout(fp, {0: 3}, pts, W)
    assert sorted(init.pixels.tolist()) == [3, 7, 12]
    assert set(init.depth().values()) == {1}


def test_cyclic_stacking_depths():
    fp = fp_of(range(20))
    pts = pts_at([(5, 0)] * 4 + [(9, 0)] * 2 + [(2, 0)])
    init = initial_layout(fp, {0: 5}, pts, W)
    assert init.depth() == {5: 2, 9: 2, 2: 1}


def test_disjoint_classes_use_own_pixels():
    fp = fp_of(range(32))
    pts = pts_at([(1, 0), (2, 0), (20, 1), (21, 1)])
    init = initial_layout(fp, {0: 2, 1: 2}, pts, W)
    got = {(p, c) for p, c in zip(init.pixels.tolist(), init.classes.tolist())}
    assert got == {(1, 0), (2, 0), (20, 1), (21, 1)}


def test_urgent_class_goes_first():
    # class 1 has a single shared pixel and needs it; class 0 has alternatives
    fp = fp_of(range(16))
    pts = pts_at([(4, 0), (5, 0), (6, 0), (4, 1)])
    init = initial_layout(fp, {0: 2, 1: 1}, pts, W)
    assign = dict(zip(init.pixels.tolist(), init.classes.tolist()))
    assert assign[4] == 1


def test_class_without_free_pixel_stays_on_its_points():
    fp = fp_of(range(16))
    pts = pts_at([(4, 0)] * 10 + [(4, 1)])
    init = initial_layout(fp, {0: 1, 1: 1}, pts, W)
    assert init.pixels.tolist() == [4, 4]


def test_budget_over_area_rejected():
    with pytest.raises(ValueError):
        initial_layout(fp_of([0, 1]), {0: 3}, pts_at([(0, 0)]), W)


def test_kd_single_cell():
    fp = fp_of([37])
    out = kd_disperse(InitialLayout(np.array([37]), np.array([0])), fp, W)
    assert out.pixels.tolist() == [37]


def test_kd_full_block():
    block = [0, 1, W, W + 1]
    out = kd_disperse(InitialLayout(np.full(4, W + 1), np.zeros(4, int)), fp_of(block), W)
    assert sorted(out.pixels.tolist()) == block


def test_kd_strip_split():
    strip = list(range(6))
    init = InitialLayout(np.array([0, 0, 5]), np.array([0, 1, 2]))
    out = kd_disperse(init, fp_of(strip), W)
    px = out.pixels.tolist()
    assert px[0] < 3 and px[1] < 3 and px[2] >= 3
    assert len(set(px)) == 3


def test_kd_rejects_outside_placements():
    with pytest.raises(ValueError):
        kd_disperse(InitialLayout(np.array([99]), np.array([0])), fp_of([1, 2]), W)


@given(st.integers(1, 40), st.data())
@settings(max_examples=300, deadline=None)
def test_kd_preserves_order_on_strips(n_cells, data):
    m = data.draw(st.integers(1, n_cells))
    cells = sorted(data.draw(st.sets(st.integers(0, 200), min_size=n_cells, max_size=n_cells)))
    q = data.draw(st.lists(st.sampled_from(cells), min_size=m, max_size=m))
    width = 256
    out = kd_disperse(InitialLayout(np.array(q), np.zeros(m, int)), fp_of(cells), width)
    assert len(set(out.pixels.tolist())) == m
    order = np.argsort(q, kind="stable")
    assert (np.diff(out.pixels[order]) > 0).all()
    cost = np.abs(out.pixels - np.array(q)).sum()
    assert cost >= order_preserving_min_cost(q, cells)


@given(st.integers(1, 12), st.integers(1, 12), st.data())
@settings(max_examples=300, deadline=None)
def test_kd_injective_in_2d(w, h, data):
    cells = [y * W + x for y in range(h) for x in range(min(w, W))]
    m = data.draw(st.integers(1, len(cells)))
    q = data.draw(st.lists(st.sampled_from(cells), min_size=m, max_size=m))
    cls = data.draw(st.lists(st.integers(0, 3), min_size=m, max_size=m))
    out = kd_disperse(InitialLayout(np.array(q), np.array(cls)), fp_of(cells), W)
    assert len(set(out.pixels.tolist())) == m
    assert set(out.pixels.tolist()) <= set(cells)
    assert out.classes.tolist() == cls


def test_assemble():
    a = PixelLayout(np.array([3]), np.array([0]))
    b = PixelLayout(np.array([9]), np.array([1]))
    assert assemble([a, b]).assignment == {3: 0, 9: 1}
    assert assemble([]).assignment == {}
    with pytest.raises(LayoutError):
        assemble([a, PixelLayout(np.array([3]), np.array([1]))])


def test_layout_all_conserves_budget_on_64px_demo():
    rng = np.random.default_rng(0)
    xy = np.vstack([rng.normal(30, 4, (3000, 2)), rng.uniform(0, 64, (400, 2))])
    ps = PointSet(xy[:, 0], xy[:, 1], rng.integers(0, 4, len(xy)), ("a", "b", "c", "d"))
    res = run(ps, CanvasSpec(64, 64))
    again = layout_all(res.equalization, res.allocation, res.points, res.partition.point_cluster)
    assert len(again.assignment) == int(res.equalization.budget.sum())
    assert np.array_equal(again.pixels, res.layout.pixels)
