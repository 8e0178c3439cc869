"""Raster output: palettes, label buffers and PPM/PNG encoding."""
from __future__ import annotations

import colorsys
import csv
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .dataset import CanvasSpec

BACKGROUND = (0xF5, 0xF5, 0xF5)
_GOLDEN_ANGLE = 137.50776405003785 / 360.0


class RenderError(ValueError):
    pass


@dataclass(frozen=True)
class Palette:
    colors: tuple
    background: tuple = BACKGROUND

    def __post_init__(self):
        cols = [tuple(int(v) for v in c) for c in self.colors]
        if len(set(cols)) != len(cols):
            raise RenderError("palette colors must be pairwise distinct")
        object.__setattr__(self, "colors", tuple(cols))
        object.__setattr__(self, "background", tuple(int(v) for v in self.background))

    def __len__(self):
        return len(self.colors)

    def table(self) -> np.ndarray:
        """``(K + 1, 3)`` lookup with the background in the last row."""
        return np.array(list(self.colors) + [self.background], dtype=np.uint8)


def default_palette(k: int, background=BACKGROUND) -> Palette:
    """Golden-angle hue steps at fixed saturation/value, skipping 8-bit collisions."""
    colors, seen = [], {tuple(background)}
    i = 0
    while len(colors) < k:
        hue = (i * _GOLDEN_ANGLE) % 1.0
        sat, val = (0.75, 0.85) if (i // 7) % 2 == 0 else (0.9, 0.6)
        rgb = tuple(int(round(v * 255)) for v in colorsys.hsv_to_rgb(hue, sat, val))
        if rgb not in seen:
            seen.add(rgb)
            colors.append(rgb)
        i += 1
    return Palette(tuple(colors), tuple(background))


def load_palette(path, class_names=()) -> Palette:
    """Read a ``class,r,g,b`` CSV; ``class`` is a class name or an integer id."""
    index = {name: i for i, name in enumerate(class_names)}
    rows = {}
    with open(path, newline="") as fh:
        for lineno, row in enumerate(csv.reader(fh), start=1):
            if not row or row[0].strip().lower() == "class":
                continue
            key = row[0].strip()
            try:
                cid = index[key] if key in index else int(key)
                rows[cid] = tuple(int(v) for v in row[1:4])
            except (ValueError, IndexError):
                raise RenderError(f"{path}: line {lineno}: bad palette row {row!r}") from None
    if not rows:
        raise RenderError(f"{path}: empty palette")
    k = max(max(rows) + 1, len(class_names))
    missing = [i for i in range(k) if i not in rows]
    if missing:
        raise RenderError(f"{path}: no color for classes {missing[:5]}")
    return Palette(tuple(rows[i] for i in range(k)))


@dataclass(frozen=True, eq=False)
class RasterImage:
    """``labels`` is ``(H, W)`` int32 with -1 for background; ``pixels`` the RGB buffer."""

    labels: np.ndarray
    pixels: np.ndarray

    @property
    def width(self) -> int:
        return self.labels.shape[1]

    @property
    def height(self) -> int:
        return self.labels.shape[0]

    @property
    def colored(self) -> int:
        return int(np.count_nonzero(self.labels >= 0))


def label_buffer(layout, canvas: CanvasSpec) -> np.ndarray:
    labels = np.full(canvas.n_pixels, -1, dtype=np.int32)
    if len(layout.pixels):
        if layout.pixels.min() < 0 or layout.pixels.max() >= canvas.n_pixels:
            raise RenderError("layout pixel outside canvas")
        labels[layout.pixels] = layout.classes
    return labels.reshape(canvas.height, canvas.width)


def render(layout, canvas: CanvasSpec, palette: Palette) -> RasterImage:
    """Paint class colors over the background; row ``y`` of the buffer is canvas row ``y``."""
    labels = label_buffer(layout, canvas)
    if len(layout.classes) and int(layout.classes.max()) >= len(palette):
        raise RenderError(f"class id {int(layout.classes.max())} has no palette color ({len(palette)} colors)")
    table = palette.table()
    return RasterImage(labels, table[labels])


def from_labels(labels: np.ndarray, palette: Palette) -> RasterImage:
    labels = np.asarray(labels, dtype=np.int32)
    return RasterImage(labels, palette.table()[labels])


def ppm_bytes(img: RasterImage) -> bytes:
    return b"P6\n%d %d\n255\n" % (img.width, img.height) + np.ascontiguousarray(img.pixels, dtype=np.uint8).tobytes()


def encode(img: RasterImage, format: str, path) -> None:
    path = Path(path)
    try:
        if format == "ppm":
            path.write_bytes(ppm_bytes(img))
        elif format == "png":
            from PIL import Image

            Image.fromarray(np.ascontiguousarray(img.pixels), "RGB").save(path, format="PNG", optimize=False)
        else:
            raise RenderError(f"unknown image format {format!r}")
    except OSError as exc:
        raise OSError(f"cannot write {path}: {exc.strerror or exc}") from exc


def decode_labels(path, palette: Palette) -> np.ndarray:
    """Recover class labels from a rendered image by exact color lookup."""
    from PIL import Image

    rgb = np.asarray(Image.open(path).convert("RGB"), dtype=np.uint32)
    code = (rgb[..., 0] << 16) | (rgb[..., 1] << 8) | rgb[..., 2]
    table = palette.table().astype(np.uint32)
    tcode = (table[:, 0] << 16) | (table[:, 1] << 8) | table[:, 2]
    order = np.argsort(tcode)
    pos = np.clip(np.searchsorted(tcode[order], code), 0, len(tcode) - 1)
    idx = order[pos]
    if (tcode[idx] != code).any():
        raise RenderError(f"{path}: image contains colors outside the palette")
    labels = idx.astype(np.int32)
    labels[labels == len(palette)] = -1
    return labels
