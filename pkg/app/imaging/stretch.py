"""Evaluation-time luminance histogram stretch (never part of a training graph)."""

import logging
import math
from typing import NamedTuple

import numpy as np

from ..core.errors import ShapeError

logger = logging.getLogger(__name__)

LUMA_WEIGHTS = np.array([0.2126, 0.7152, 0.0722])


class StretchResult(NamedTuple):
    image: np.ndarray
    degenerate: bool


def saturation_bounds(values: np.ndarray, saturation: float = 0.05):
    """Low/high levels leaving ``saturation`` of the pixels clipped at each end.

    The low level is the smallest value with at least that fraction of pixels
    at or below it; the high level is the largest with that fraction at or
    above it.
    """
    ordered = np.sort(np.asarray(values, dtype=np.float64).reshape(-1))
    count = max(1, math.ceil(ordered.size * saturation - 1e-9))
    return float(ordered[count - 1]), float(ordered[ordered.size - count])


def histogram_stretch(rgb: np.ndarray, saturation: float = 0.05) -> StretchResult:
    """Remap luminance so its 5%/95% levels land on 0 and 1, scaling RGB per pixel"""
    rgb = np.asarray(rgb, dtype=np.float64)
    if rgb.ndim != 3 or rgb.shape[2] != 3:
        raise ShapeError(f"histogram_stretch expects an H×W×3 image, got shape {rgb.shape}")
    luma = rgb @ LUMA_WEIGHTS
    low, high = saturation_bounds(luma, saturation)
    if high <= low:
        logger.warning(f"Histogram stretch skipped: degenerate luminance range [{low}, {high}]")
        return StretchResult(rgb.copy(), True)

    stretched = np.clip((luma - low) / (high - low), 0.0, 1.0)
    safe = luma > 0
    gain = np.where(safe, stretched / np.where(safe, luma, 1.0), 0.0)
    out = np.where(safe[..., None], rgb * gain[..., None], stretched[..., None])
    return StretchResult(np.clip(out, 0.0, 1.0), False)
