"""Render per-patch weights into pixel-level topographic maps.

Each pixel accumulates the weights of all patches whose rectangle contains
it. Rectangles are half-open, [x, x+w) x [y, y+h), so shared borders are
never double-counted, and are clipped to the image. Rendering scatters four
signed corner values per patch and integrates with a double cumulative sum,
O(N + H*W) instead of the naive O(H*W*N) per-pixel membership sum.
"""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

import numpy as np

from . import kernels
from .pooling import PatchWeights

__all__ = [
    "WeightMap",
    "render_weight_map",
    "normalize_map",
    "write_pgm",
    "write_map_csv",
    "read_map_csv",
]


@dataclass(frozen=True)
class WeightMap:
    """An H x W grid of accumulated patch weights."""

    values: np.ndarray

    def __post_init__(self):
        values = np.asarray(self.values, dtype=np.float64)
        if values.ndim != 2 or values.shape[0] < 1 or values.shape[1] < 1:
            raise ValueError(f"weight map must be (H>=1, W>=1), got {values.shape}")
        object.__setattr__(self, "values", values)

    @property
    def height(self) -> int:
        return self.values.shape[0]

    @property
    def width(self) -> int:
        return self.values.shape[1]


def _clipped_bounds(geometry: np.ndarray, height: int, width: int):
    # Pixel (r, c) lies in [x, x+w) x [y, y+h) iff ceil(x) <= c < ceil(x+w),
    # same for rows; ceil keeps integer geometry exact.
    x0 = np.maximum(np.ceil(geometry[:, 0]), 0).astype(np.int64)
    y0 = np.maximum(np.ceil(geometry[:, 1]), 0).astype(np.int64)
    x1 = np.minimum(np.ceil(geometry[:, 0] + geometry[:, 2]), width).astype(np.int64)
    y1 = np.minimum(np.ceil(geometry[:, 1] + geometry[:, 3]), height).astype(np.int64)
    return x0, x1, y0, y1


def render_weight_map(
    geometry: np.ndarray, weights: PatchWeights, height: int, width: int
) -> WeightMap:
    """Sum patch weights into every pixel covered by the patch rectangle.

    ``geometry`` is (N, 4) rows of (x, y, w, h); rectangles may extend past
    the borders and are clipped. Pixels covered by no patch are 0.
    """
    if height < 1 or width < 1:
        raise ValueError(f"image must have positive size, got {height}x{width}")
    geometry = np.asarray(geometry, dtype=np.float64)
    if geometry.ndim != 2 or geometry.shape[1] != 4:
        raise ValueError(f"geometry must be (N, 4), got {geometry.shape}")
    if geometry.shape[0] != weights.n:
        raise ValueError(
            f"{weights.n} weights for {geometry.shape[0]} patch rectangles"
        )
    if np.any(geometry[:, 2:] < 0):
        raise ValueError("patch sizes must be non-negative")

    x0, x1, y0, y1 = _clipped_bounds(geometry, height, width)
    visible = (x1 > x0) & (y1 > y0)
    acc = np.zeros((height + 1, width + 1))
    kernels.scatter_corners(
        x0[visible], x1[visible], y0[visible], y1[visible],
        weights.alpha[visible], acc,
    )
    summed = np.cumsum(np.cumsum(acc, axis=0), axis=1)
    return WeightMap(summed[:height, :width])


def normalize_map(m: WeightMap) -> WeightMap:
    """Affine rescale to [0, 1]; a constant map becomes 0.5 everywhere."""
    lo = m.values.min()
    hi = m.values.max()
    if hi == lo:
        return WeightMap(np.full_like(m.values, 0.5))
    return WeightMap((m.values - lo) / (hi - lo))


def write_pgm(m: WeightMap, path: str | Path) -> None:
    """Write as plain PGM (P2, maxval 255) after [0, 1] normalization."""
    levels = np.rint(normalize_map(m).values * 255).astype(np.int64)
    lines = ["P2", f"{m.width} {m.height}", "255"]
    lines.extend(" ".join(str(v) for v in row) for row in levels)
    Path(path).write_text("\n".join(lines) + "\n")


def write_map_csv(m: WeightMap, path: str | Path) -> None:
    """Write row-major values with a ``height,width`` header."""
    lines = ["height,width", f"{m.height},{m.width}"]
    lines.extend(",".join(f"{v:.12g}" for v in row) for row in m.values)
    Path(path).write_text("\n".join(lines) + "\n")


def read_map_csv(path: str | Path) -> WeightMap:
    lines = Path(path).read_text().splitlines()
    if not lines or lines[0] != "height,width":
        raise ValueError(f"{path}: expected 'height,width' header")
    try:
        height, width = (int(tok) for tok in lines[1].split(","))
    except (IndexError, ValueError) as err:
        raise ValueError(f"{path}: malformed dimension row") from err
    rows = [
        [float(tok) for tok in line.split(",")] for line in lines[2 : 2 + height]
    ]
    values = np.asarray(rows, dtype=np.float64)
    if values.shape != (height, width):
        raise ValueError(
            f"{path}: value grid {values.shape} does not match header "
            f"({height}, {width})"
        )
    return WeightMap(values)
