import sys
from pathlib import Path

import numpy as np
import pytest

sys.path.insert(0, str(Path(__file__).parent))

from pxsc.dataset import PointSet  # noqa: E402

# criterion number -> (passed, detail); filled by test_acceptance.py
ACCEPTANCE: dict[int, tuple[bool, str]] = {}


@pytest.fixture
def record():
    def _record(num, ok, detail=""):
        ACCEPTANCE[num] = (bool(ok), detail)
    return _record


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for num in sorted(ACCEPTANCE):
        ok, detail = ACCEPTANCE[num]
        terminalreporter.write_line(f"criterion {num:2d}: {'PASS' if ok else 'FAIL'}  {detail}")


def random_points(rng, n, size=64.0, n_classes=3, blobs=None):
    """Clumpy random points inside [0, size)^2, mixing blobs and uniform noise."""
    blobs = blobs if blobs is not None else int(rng.integers(1, 6))
    parts = [rng.uniform(0, size, size=(max(1, n // 10), 2))]
    for _ in range(blobs):
        c = rng.uniform(0, size, 2)
        s = rng.uniform(0.3, size / 6)
        parts.append(rng.normal(c, s, size=(max(1, n // blobs), 2)))
    xy = np.concatenate(parts)[:n]
    xy = np.clip(xy, 0.0, np.nextafter(size, 0.0))
    cls = rng.integers(0, n_classes, len(xy)).astype(np.int32)
    return PointSet(xy[:, 0], xy[:, 1], cls, tuple(str(i) for i in range(n_classes)))


@pytest.fixture
def rng():
    return np.random.default_rng(12345)
