"""Pixel-level abstraction of large multiclass scatterplots."""
from .dataset import CanvasSpec, PointSet, load_points, normalize
from .pipeline import RunConfig, RunResult, run

__all__ = ["CanvasSpec", "PointSet", "RunConfig", "RunResult", "load_points", "normalize", "run"]
__version__ = "0.1.0"
