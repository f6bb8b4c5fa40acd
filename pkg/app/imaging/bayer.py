"""Bayer colour-filter-array sampling and bilinear demosaicing."""

import logging
from dataclasses import dataclass
from enum import Enum

import numpy as np

from ..autodiff import ops
from ..core.errors import ShapeError

logger = logging.getLogger(__name__)

# Channel index (0=R, 1=G, 2=B) at each site of the repeating 2×2 cell.
_LAYOUTS = {
    "RGGB": ((0, 1), (1, 2)),
    "GRBG": ((1, 0), (2, 1)),
    "GBRG": ((1, 2), (0, 1)),
    "BGGR": ((2, 1), (1, 0)),
}

_GREEN_STENCIL = np.array([[0.0, 1.0, 0.0], [1.0, 4.0, 1.0], [0.0, 1.0, 0.0]]) / 4.0
_RED_BLUE_STENCIL = np.array([[1.0, 2.0, 1.0], [2.0, 4.0, 2.0], [1.0, 2.0, 1.0]]) / 4.0


class BayerPattern(str, Enum):
    RGGB = "RGGB"
    GRBG = "GRBG"
    GBRG = "GBRG"
    BGGR = "BGGR"

    @property
    def cell(self) -> np.ndarray:
        """2×2 array of channel indices"""
        return np.array(_LAYOUTS[self.value])

    def channel_map(self, height: int, width: int) -> np.ndarray:
        """Channel index sampled at every site of an H×W mosaic"""
        return np.tile(self.cell, (height // 2, width // 2))

    def flipped(self, horizontal: bool = False, vertical: bool = False) -> "BayerPattern":
        """Pattern seen after mirroring an even-sized mosaic"""
        cell = self.cell
        if horizontal:
            cell = cell[:, ::-1]
        if vertical:
            cell = cell[::-1, :]
        key = tuple(tuple(int(v) for v in row) for row in cell)
        for name, layout in _LAYOUTS.items():
            if layout == key:
                return BayerPattern(name)
        raise AssertionError(f"flip produced an invalid cell {key}")


@dataclass(frozen=True, eq=False)
class RawImage:
    """Single-channel mosaic with values in [0,1] and even extents"""

    values: np.ndarray
    pattern: BayerPattern = BayerPattern.RGGB

    def __post_init__(self):
        values = np.asarray(self.values, dtype=np.float64)
        if values.ndim != 2:
            raise ShapeError(f"RawImage must be H×W, got shape {values.shape}")
        if values.shape[0] % 2 or values.shape[1] % 2:
            raise ShapeError(f"RawImage extents must be even, got {values.shape}")
        values = np.clip(values, 0.0, 1.0)
        values.setflags(write=False)
        object.__setattr__(self, "values", values)
        object.__setattr__(self, "pattern", BayerPattern(self.pattern))

    @property
    def shape(self):
        return self.values.shape


def mosaic(rgb: np.ndarray, pattern: BayerPattern = BayerPattern.RGGB) -> RawImage:
    """Sample one channel per site as dictated by the pattern"""
    rgb = np.asarray(rgb, dtype=np.float64)
    if rgb.ndim != 3 or rgb.shape[2] != 3:
        raise ShapeError(f"mosaic expects an H×W×3 image, got shape {rgb.shape}")
    height, width = rgb.shape[:2]
    if height % 2 or width % 2:
        raise ShapeError(f"mosaic needs even extents, got {height}×{width}")
    channels = BayerPattern(pattern).channel_map(height, width)
    values = np.take_along_axis(rgb, channels[..., None], axis=2)[..., 0]
    return RawImage(values, pattern)


def bilinear_demosaic(raw: RawImage) -> np.ndarray:
    """Fill missing channels with the mean of the nearest same-channel sites.

    Green at a red/blue site averages its 4 cross neighbours; red/blue average
    2 neighbours at green sites and 4 diagonals at the opposite colour. Reflect
    extension keeps the CFA phase at the borders.
    """
    height, width = raw.shape
    channels = raw.pattern.channel_map(height, width)
    out = np.empty((height, width, 3))
    for channel, stencil in ((0, _RED_BLUE_STENCIL), (1, _GREEN_STENCIL), (2, _RED_BLUE_STENCIL)):
        sampled = np.where(channels == channel, raw.values, 0.0)[..., None]
        filtered = ops.conv2d(sampled, stencil[:, :, None, None], np.zeros(1), stride=1, padding="reflect")
        out[..., channel] = filtered.data[..., 0]
    return np.clip(out, 0.0, 1.0)
