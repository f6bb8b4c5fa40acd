"""Random crops and flip augmentation that keep the Bayer phase consistent."""

import logging
from dataclasses import replace
from typing import Optional, Sequence, Union

import numpy as np

from ..core.errors import ShapeError
from ..imaging.bayer import RawImage
from .pairs import ImagePair

logger = logging.getLogger(__name__)

Seed = Union[int, Sequence[int]]


def example_seed(seed: int, epoch: int, index: int) -> tuple:
    """Seed of the example delivered for ``index`` in ``epoch``"""
    return (int(seed), int(epoch), int(index))


def sample_patch(
    pair: ImagePair,
    size: Optional[int],
    seed: Seed,
    augment: bool = False,
    vertical_flip: bool = False,
) -> ImagePair:
    """Crop an aligned square patch at an even offset and optionally flip it.

    Args:
        pair (ImagePair): Source pair
        size (Optional[int]): Even patch side, None for the whole image
        seed: Integer or integer tuple driving offsets and flips
        augment (bool): Apply a random horizontal flip
        vertical_flip (bool): Also allow a random vertical flip (with augment)

    Returns:
        ImagePair: The patch, its Bayer pattern updated for the flips
    """
    height, width = pair.shape
    rng = np.random.default_rng(seed)

    if size is None:
        top, left, patch_h, patch_w = 0, 0, height, width
    else:
        if size <= 0 or size % 2:
            raise ShapeError(f"Patch size must be a positive even number, got {size}")
        if size > height or size > width:
            raise ShapeError(f"Patch size {size} exceeds image extents {height}×{width}")
        top = 2 * int(rng.integers(0, (height - size) // 2 + 1))
        left = 2 * int(rng.integers(0, (width - size) // 2 + 1))
        patch_h = patch_w = size

    flip_h = bool(augment and rng.random() < 0.5)
    flip_v = bool(augment and vertical_flip and rng.random() < 0.5)

    def crop(array: np.ndarray) -> np.ndarray:
        out = array[top : top + patch_h, left : left + patch_w]
        if flip_h:
            out = out[:, ::-1]
        if flip_v:
            out = out[::-1]
        return np.ascontiguousarray(out)

    pattern = pair.meta.pattern
    if pair.is_raw:
        if patch_h % 2 or patch_w % 2:
            raise ShapeError(f"Raw patches need even extents, got {patch_h}×{patch_w}")
        pattern = pattern.flipped(horizontal=flip_h, vertical=flip_v)
        new_input = RawImage(crop(pair.input.values), pattern)
    else:
        new_input = crop(pair.input)
    return ImagePair(new_input, crop(pair.target), replace(pair.meta, pattern=pattern))
