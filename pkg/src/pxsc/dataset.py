"""Point ingestion, canvas normalization and class bookkeeping."""
from __future__ import annotations

import csv
import struct
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np

BINARY_MAGIC = b"PXSC1"
BINARY_RECORD = np.dtype([("x", "<f4"), ("y", "<f4"), ("cls", "<u2")])


class DatasetError(ValueError):
    """Raised for malformed or empty point files."""


@dataclass(frozen=True)
class CanvasSpec:
    width: int
    height: int

    def __post_init__(self):
        if self.width < 8 or self.height < 8:
            raise ValueError(f"canvas must be at least 8x8, got {self.width}x{self.height}")

    @classmethod
    def parse(cls, text: str) -> "CanvasSpec":
        w, _, h = text.lower().partition("x")
        return cls(int(w), int(h))

    @property
    def n_pixels(self) -> int:
        return self.width * self.height

    def __str__(self):
        return f"{self.width}x{self.height}"


@dataclass(frozen=True, eq=False)
class PointSet:
    """Immutable 2D multiclass points.

    ``x``/``y`` are float64 arrays, ``cls`` holds dense class ids in ``0..K-1``.
    ``bounds`` is the (xmin, xmax, ymin, ymax) of the coordinates *before* the
    most recent normalization (or of the raw data for freshly loaded sets).
    """

    x: np.ndarray
    y: np.ndarray
    cls: np.ndarray
    class_names: tuple[str, ...]
    bounds: tuple[float, float, float, float] = field(default=(0.0, 0.0, 0.0, 0.0))

    def __post_init__(self):
        x = np.ascontiguousarray(self.x, dtype=np.float64)
        y = np.ascontiguousarray(self.y, dtype=np.float64)
        c = np.ascontiguousarray(self.cls, dtype=np.int32)
        if not (len(x) == len(y) == len(c)):
            raise DatasetError("x, y and class arrays differ in length")
        if len(x) == 0:
            raise DatasetError("point set is empty")
        if c.min() < 0 or c.max() >= len(self.class_names):
            raise DatasetError("class id outside 0..K-1")
        for a in (x, y, c):
            a.setflags(write=False)
        object.__setattr__(self, "x", x)
        object.__setattr__(self, "y", y)
        object.__setattr__(self, "cls", c)
        object.__setattr__(self, "class_names", tuple(self.class_names))
        if self.bounds == (0.0, 0.0, 0.0, 0.0):
            object.__setattr__(self, "bounds", _bbox(x, y))

    def __len__(self):
        return len(self.x)

    @property
    def n_classes(self) -> int:
        return len(self.class_names)

    @property
    def class_counts(self) -> np.ndarray:
        return np.bincount(self.cls, minlength=self.n_classes)

    @classmethod
    def from_labels(cls, x, y, labels, bounds=None) -> "PointSet":
        """Build a point set from arbitrary labels, ids dense in first-appearance order."""
        labels = np.asarray(labels)
        uniq, first, inv = np.unique(labels, return_index=True, return_inverse=True)
        order = np.argsort(first, kind="stable")
        rank = np.empty(len(uniq), dtype=np.int32)
        rank[order] = np.arange(len(uniq), dtype=np.int32)
        names = tuple(str(u) for u in uniq[order])
        kw = {} if bounds is None else {"bounds": bounds}
        return cls(np.asarray(x, float), np.asarray(y, float), rank[inv.ravel()], names, **kw)


def _bbox(x, y):
    return (float(x.min()), float(x.max()), float(y.min()), float(y.max()))


def load_points(path, format: str | None = None) -> PointSet:
    """Read ``csv``, ``tsv`` or ``binary-f32`` point files.

    Text formats need a header with ``x``, ``y`` and ``class`` columns; class
    values may be arbitrary strings. The format is inferred from the suffix when
    not given (``.bin``/``.pxsc`` are binary, ``.tsv`` tab separated).
    """
    path = Path(path)
    if format is None:
        suffix = path.suffix.lower()
        format = {".tsv": "tsv", ".bin": "binary-f32", ".pxsc": "binary-f32"}.get(suffix, "csv")
    if format == "binary-f32":
        return _load_binary(path)
    if format not in ("csv", "tsv"):
        raise DatasetError(f"unknown format {format!r}")
    return _load_text(path, "\t" if format == "tsv" else ",")


def _load_text(path: Path, delimiter: str) -> PointSet:
    xs, ys, labels = [], [], []
    with open(path, newline="") as fh:
        reader = csv.reader(fh, delimiter=delimiter)
        header = next(reader, None)
        if header is None:
            raise DatasetError(f"{path}: empty file")
        header = [h.strip().lower() for h in header]
        try:
            ix, iy, ic = header.index("x"), header.index("y"), header.index("class")
        except ValueError:
            raise DatasetError(f"{path}: line 1: header must contain x, y and class columns") from None
        for row in reader:
            if not row or (len(row) == 1 and not row[0].strip()):
                continue
            try:
                xs.append(float(row[ix]))
                ys.append(float(row[iy]))
                labels.append(row[ic].strip())
            except (ValueError, IndexError) as exc:
                raise DatasetError(f"{path}: line {reader.line_num}: {exc}") from None
    if not xs:
        raise DatasetError(f"{path}: empty dataset")
    x, y = np.array(xs), np.array(ys)
    if not (np.isfinite(x).all() and np.isfinite(y).all()):
        raise DatasetError(f"{path}: non-finite coordinate")
    return PointSet.from_labels(x, y, np.array(labels, dtype=object).astype(str))


def _load_binary(path: Path) -> PointSet:
    raw = path.read_bytes()
    if len(raw) == 0:
        raise DatasetError(f"{path}: empty file")
    if raw[:5] != BINARY_MAGIC or len(raw) < 13:
        raise DatasetError(f"{path}: bad magic, expected {BINARY_MAGIC!r}")
    (count,) = struct.unpack_from("<Q", raw, 5)
    if count == 0:
        raise DatasetError(f"{path}: empty dataset")
    need = 13 + count * BINARY_RECORD.itemsize
    if len(raw) < need:
        raise DatasetError(f"{path}: truncated, header says {count} records")
    rec = np.frombuffer(raw, dtype=BINARY_RECORD, count=count, offset=13)
    return PointSet.from_labels(rec["x"].astype(float), rec["y"].astype(float), rec["cls"])


def save_points(ps: PointSet, path, format: str = "csv") -> None:
    """Write a point set; class columns use class names (binary needs integer names)."""
    path = Path(path)
    if format == "binary-f32":
        try:
            codes = np.array([int(n) for n in ps.class_names], dtype=np.uint16)[ps.cls]
        except ValueError:
            codes = ps.cls.astype(np.uint16)
        rec = np.empty(len(ps), dtype=BINARY_RECORD)
        rec["x"], rec["y"], rec["cls"] = ps.x, ps.y, codes
        path.write_bytes(BINARY_MAGIC + struct.pack("<Q", len(ps)) + rec.tobytes())
        return
    sep = "\t" if format == "tsv" else ","
    names = np.array(ps.class_names, dtype=object)[ps.cls]
    with open(path, "w", newline="") as fh:
        fh.write(sep.join(("x", "y", "class")) + "\n")
        for x, y, n in zip(ps.x.tolist(), ps.y.tolist(), names):
            fh.write(f"{x!r}{sep}{y!r}{sep}{n}\n")


def normalize(ps: PointSet, canvas: CanvasSpec, margin: float = 0.0) -> PointSet:
    """Fit the data bounding box into the canvas with a uniform scale.

    The box is centred in ``[m*W, (1-m)*W) x [m*H, (1-m)*H)``. Zero-extent
    axes collapse onto the canvas centre. Coordinates that land on the upper
    edge are pulled to the largest float below it so they stay in the last
    pixel.
    """
    if not 0.0 <= margin < 0.5:
        raise ValueError("margin must lie in [0, 0.5)")
    W, H = canvas.width, canvas.height
    lo_x, hi_x = margin * W, (1.0 - margin) * W
    lo_y, hi_y = margin * H, (1.0 - margin) * H
    xmin, xmax, ymin, ymax = _bbox(ps.x, ps.y)
    ex, ey = xmax - xmin, ymax - ymin
    scales = []
    if ex > 0:
        scales.append((hi_x - lo_x) / ex)
    if ey > 0:
        scales.append((hi_y - lo_y) / ey)
    s = min(scales) if scales else 0.0

    def fit(v, vmin, ext, lo, hi, size):
        if ext == 0:
            return np.full_like(v, size / 2.0)
        off = lo + ((hi - lo) - ext * s) / 2.0
        out = off + (v - vmin) * s
        return np.clip(out, lo, np.nextafter(hi, -np.inf))

    x = fit(ps.x, xmin, ex, lo_x, hi_x, W)
    y = fit(ps.y, ymin, ey, lo_y, hi_y, H)
    return replace(ps, x=x, y=y, bounds=(xmin, xmax, ymin, ymax))


def pixel_index(ps: PointSet, canvas: CanvasSpec) -> np.ndarray:
    """Row-major linear pixel index of every point (points must be in canvas space)."""
    px = np.minimum(ps.x.astype(np.int64), canvas.width - 1)
    py = np.minimum(ps.y.astype(np.int64), canvas.height - 1)
    return py * canvas.width + px
