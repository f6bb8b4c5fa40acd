"""PNG (8/16-bit) and PGM/PPM reading and writing through OpenCV.

Arrays are float64 in [0,1], H×W for single-channel files and H×W×3 RGB for
colour files (OpenCV's BGR order is swapped at this boundary only).
"""

import logging
from pathlib import Path
from typing import Union

import cv2
import numpy as np

from ..core.errors import ImageIOError

logger = logging.getLogger(__name__)

PathLike = Union[str, Path]
IMAGE_SUFFIXES = (".png", ".pgm", ".ppm", ".jpg", ".jpeg")


def read_image(path: PathLike) -> np.ndarray:
    """Read an image and normalize it to [0,1] by its bit depth"""
    path = Path(path)
    data = cv2.imread(str(path), cv2.IMREAD_UNCHANGED)
    if data is None:
        logger.error(f"Unreadable image file: {path}")
        raise ImageIOError(f"Could not read image file: {path}")

    if data.dtype == np.uint8:
        scale = 255.0
    elif data.dtype == np.uint16:
        scale = 65535.0
    else:
        raise ImageIOError(f"Unsupported sample type {data.dtype} in {path}")

    image = data.astype(np.float64) / scale
    if image.ndim == 3:
        if image.shape[2] == 4:
            image = image[..., :3]
        image = image[..., ::-1]
    return np.ascontiguousarray(image)


def write_image(path: PathLike, image: np.ndarray, bit_depth: int = 16) -> Path:
    """Quantize a [0,1] image to 8 or 16 bits and write it"""
    path = Path(path)
    if bit_depth not in (8, 16):
        raise ValueError(f"bit_depth must be 8 or 16, got {bit_depth}")
    image = np.clip(np.asarray(image, dtype=np.float64), 0.0, 1.0)
    if image.ndim == 3 and image.shape[2] == 1:
        image = image[..., 0]
    if image.ndim == 3:
        image = image[..., ::-1]

    if bit_depth == 16:
        data = np.round(image * 65535.0).astype(np.uint16)
    else:
        data = np.round(image * 255.0).astype(np.uint8)

    path.parent.mkdir(parents=True, exist_ok=True)
    try:
        ok = cv2.imwrite(str(path), np.ascontiguousarray(data))
    except cv2.error as e:
        logger.error(f"OpenCV failed writing {path}: {str(e)}")
        raise ImageIOError(f"Could not write image file: {path}") from e
    if not ok:
        raise ImageIOError(f"Could not write image file: {path}")
    return path
