"""Deterministic synthetic datasets for demos, tests and benchmarks."""
from __future__ import annotations

import numpy as np

from .dataset import PointSet


def gaussian_mixture(n: int, n_classes: int, seed: int = 0, n_components: int | None = None,
                     purity: float = 0.8) -> PointSet:
    """Anisotropic Gaussian blobs with heavy size imbalance.

    Each component has a dominant class (``purity`` of its points); the rest
    are drawn from all classes so every region carries minority classes.
    """
    rng = np.random.default_rng(seed)
    n_comp = n_components or max(4, 2 * n_classes)
    weights = rng.pareto(1.2, n_comp) + 0.05
    weights /= weights.sum()
    sizes = rng.multinomial(n, weights)
    centers = rng.uniform(0.0, 100.0, size=(n_comp, 2))
    scales = rng.uniform(0.5, 8.0, size=(n_comp, 2))
    dominant = np.arange(n_comp) % n_classes
    xs, ys, cs = [], [], []
    for i in range(n_comp):
        k = sizes[i]
        if k == 0:
            continue
        xy = rng.normal(centers[i], scales[i], size=(k, 2))
        cls = np.where(rng.random(k) < purity, dominant[i], rng.integers(0, n_classes, k))
        xs.append(xy[:, 0])
        ys.append(xy[:, 1])
        cs.append(cls)
    x, y, c = np.concatenate(xs), np.concatenate(ys), np.concatenate(cs)
    order = rng.permutation(len(x))
    names = tuple(str(i) for i in range(n_classes))
    return PointSet(x[order], y[order], c[order].astype(np.int32), names)


def hdr_fixture(seed: int = 0, dense: int = 100_000, sparse: int = 1_000, outliers: int = 20) -> PointSet:
    """One dense blob, one sparse blob and a handful of third-class points inside the dense blob."""
    rng = np.random.default_rng(seed)
    a = rng.normal((30.0, 50.0), 6.0, size=(dense, 2))
    b = rng.normal((75.0, 50.0), 10.0, size=(sparse, 2))
    ang = rng.uniform(0, 2 * np.pi, outliers)
    rad = rng.uniform(0, 10.0, outliers)
    o = np.stack([30.0 + rad * np.cos(ang), 50.0 + rad * np.sin(ang)], axis=1)
    xy = np.concatenate([a, b, o])
    cls = np.concatenate([np.zeros(dense), np.ones(sparse), np.full(outliers, 2)]).astype(np.int32)
    return PointSet(xy[:, 0], xy[:, 1], cls, ("dense", "sparse", "outlier"))


def demo_fixture() -> PointSet:
    """The 10k-point, 5-class mixture used by the demo config."""
    return gaussian_mixture(10_000, 5, seed=7)
