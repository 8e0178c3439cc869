from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from oracles import brute_partition, exact_kurtosis
from pxsc.dataset import PointSet
from pxsc.partition import (L_MAX, GridCell, clustering, grid_size, gridding, iso_density_partition, kurtosis,
                            partition_points)


def pointset(xy, cls=None):
    xy = np.asarray(xy, dtype=float).reshape(-1, 2)
    cls = np.zeros(len(xy), int) if cls is None else np.asarray(cls)
    return PointSet(xy[:, 0], xy[:, 1], cls, tuple(str(i) for i in range(int(cls.max()) + 1)))


def cell(ix, iy, count=1, level=0):
    return GridCell(level, ix, iy, count, {0: count}, tuple(range(count)))


def test_grid_size_halves():
    assert [grid_size(l) for l in (-2, -1, 0, 1, 3)] == [4.0, 2.0, 1.0, 0.5, 0.125]


def test_gridding_unit_squares():
    ps = pointset([(0.2, 0.2), (0.7, 0.7), (1.5, 0.5), (1.5, 1.5)])
    cells = gridding(ps, 0)
    assert [(c.ix, c.iy, c.count) for c in cells] == [(0, 0, 2), (1, 0, 1), (1, 1, 1)]
    assert sum(c.count for c in cells) == 4


def test_gridding_coarse_single_cell():
    ps = pointset(np.random.default_rng(0).uniform(0, 7.9, (50, 2)))
    cells = gridding(ps, -3)
    assert len(cells) == 1 and cells[0].count == 50


def test_gridding_subset_and_empty():
    ps = pointset([(0.5, 0.5), (3.5, 3.5)])
    assert gridding(ps, 0, point_ids=[]) == []
    assert [c.point_ids for c in gridding(ps, 0, point_ids=[1])] == [(1,)]


def test_gridding_per_class():
    ps = pointset([(0.1, 0.1), (0.2, 0.3), (0.4, 0.4)], cls=[0, 1, 1])
    (c,) = gridding(ps, 0)
    assert c.per_class == {0: 1, 1: 2}


def test_diagonal_cells_join():
    assert len(clustering([cell(0, 0), cell(1, 1)])) == 1


def test_distance_two_cells_split():
    assert len(clustering([cell(0, 0), cell(2, 2)])) == 2


def test_full_block_is_one_cluster():
    out = clustering([cell(i, j) for i in range(5) for j in range(5)])
    assert len(out) == 1 and len(out[0].cells) == 25


def test_clustering_rejects_mixed_levels():
    with pytest.raises(ValueError):
        clustering([cell(0, 0, level=0), cell(0, 1, level=1)])


def test_clustering_handles_negative_indices():
    assert len(clustering([cell(-1, -1), cell(0, 0), cell(-3, 0)])) == 2


@pytest.mark.parametrize("counts,want", [
    ([5, 5, 5, 5], 0.0),
    ([7], 0.0),
    ([1, 2, 3], 0.0),
    ([1, 1, 1, 9], 336 / 144),
])
def test_kurtosis_values(counts, want):
    assert kurtosis(counts) == pytest.approx(want, rel=1e-12)


@given(st.lists(st.integers(1, 1000), min_size=1, max_size=60))
@settings(max_examples=300, deadline=None)
def test_kurtosis_matches_exact(counts):
    assert kurtosis(counts) == pytest.approx(float(exact_kurtosis(counts)), rel=1e-9)


def test_exact_kurtosis_frozen_value():
    assert exact_kurtosis([1, 1, 1, 9]) == Fraction(7, 3)


def test_uniform_blob_is_one_cluster():
    g = (np.arange(20) + 0.5)
    xy = np.array([(x, y) for x in g for y in g])
    out = iso_density_partition(pointset(xy), theta_k=10, l_init=0)
    assert len(out) == 1 and out[0].level == 0 and out[0].kurtosis == 0.0


def test_two_separated_blobs():
    rng = np.random.default_rng(1)
    a = rng.uniform(0, 10, (400, 2))
    b = rng.uniform(40, 50, (400, 2))
    out = iso_density_partition(pointset(np.vstack([a, b])), theta_k=10, l_init=-1)
    assert len(out) == 2
    assert sorted(len(c) for c in out) == [400, 400]


def test_peak_splits_out_and_matches_oracle():
    rng = np.random.default_rng(2)
    base = rng.uniform(8, 56, (3000, 2))
    peak = rng.normal(32, 0.15, (1500, 2))
    ps = pointset(np.vstack([base, peak]))
    out = iso_density_partition(ps, theta_k=10, l_init=-2)
    assert max(c.level for c in out) > -2
    peak_ids = set(range(3000, 4500))
    best = max(out, key=lambda c: len(peak_ids & set(c.point_ids.tolist())) / len(c))
    assert len(peak_ids & set(best.point_ids.tolist())) / len(best) > 0.5
    want = brute_partition(ps.x.tolist(), ps.y.tolist(), 10, -2)
    assert sorted(sorted(c.point_ids.tolist()) for c in out) == sorted(sorted(s) for _, s in want)


def test_level_capped_at_l_max():
    xy = np.vstack([np.full((2000, 2), 10.0), np.random.default_rng(3).uniform(0, 20, (200, 2))])
    res = partition_points(xy[:, 0], xy[:, 1], theta_k=1.5, l_init=0)
    assert res.level.max() <= L_MAX
    gate = (res.kurtosis <= 1.5) | (res.level == L_MAX)
    assert gate.all()


def test_partition_result_is_a_partition():
    rng = np.random.default_rng(4)
    xy = rng.uniform(0, 64, (3000, 2))
    res = partition_points(xy[:, 0], xy[:, 1], 3.3, -1)
    assert res.point_count.sum() == 3000
    assert np.array_equal(np.bincount(res.point_cluster), res.point_count)
    for cid in range(res.n_clusters):
        c = res.cluster(cid)
        assert c.cell_counts.sum() == len(c.point_ids)
    # canonical numbering: by smallest point id
    firsts = [res.point_ids(c).min() for c in range(res.n_clusters)]
    assert firsts == sorted(firsts)


def test_invalid_arguments():
    with pytest.raises(ValueError):
        partition_points([0.0], [0.0], 0.0, 0)
    with pytest.raises(ValueError):
        partition_points([0.0], [0.0], 10.0, L_MAX + 1)


def test_dump_csv(tmp_path):
    xy = np.random.default_rng(5).uniform(0, 30, (500, 2))
    res = partition_points(xy[:, 0], xy[:, 1], 10.0, -1)
    res.dump_csv(tmp_path / "p.csv")
    lines = (tmp_path / "p.csv").read_text().splitlines()
    assert lines[0] == "level,cell_count,point_count,kurtosis"
    assert len(lines) == res.n_clusters + 1


@given(st.lists(st.tuples(st.floats(0, 63.99), st.floats(0, 63.99)), min_size=1, max_size=300),
       st.floats(1.1, 20.0), st.integers(-3, 3))
@settings(max_examples=150, deadline=None)
def test_matches_oracle_property(pts, theta, l_init):
    xy = np.array(pts)
    res = iso_density_partition(pointset(xy), theta_k=theta, l_init=l_init)
    want = brute_partition(xy[:, 0].tolist(), xy[:, 1].tolist(), theta, l_init)
    assert sorted((c.level, sorted(c.point_ids.tolist())) for c in res) == \
        sorted((lev, sorted(s)) for lev, s in want)
