"""The global quadratic colour transform applied by the high-level stage.

Each pixel (r, g, b) is lifted to the row-major upper triangle of
[r g b 1]ᵀ[r g b 1]:

    (r², rg, rb, r, g², gb, g, b², b, 1)

and mapped to a new RGB value by a 3×10 matrix W. This serialization is frozen
(checkpoints tag it as ``triu-rgb1-v1``).
"""

import logging
from dataclasses import dataclass
from typing import Sequence, Union

import numpy as np

from ..autodiff import ops
from ..autodiff.tensor import Tensor, apply_op
from ..core.errors import ShapeError

logger = logging.getLogger(__name__)

MONOMIAL_ORDER_TAG = "triu-rgb1-v1"
MONOMIAL_COUNT = 10
# Positions of r, g, b and the constant 1 in the monomial vector.
AFFINE_INDICES = (3, 6, 8, 9)

# (i, j) pairs of [r g b 1] producing each monomial, index 3 is the constant.
_PAIRS = [(0, 0), (0, 1), (0, 2), (0, 3), (1, 1), (1, 2), (1, 3), (2, 2), (2, 3), (3, 3)]


@dataclass(frozen=True, eq=False)
class ColorTransform:
    """3×10 quadratic pixel-colour operator"""

    matrix: np.ndarray

    def __post_init__(self):
        matrix = np.array(self.matrix, dtype=np.float64)
        if matrix.shape != (3, MONOMIAL_COUNT):
            raise ShapeError(f"ColorTransform must be 3×{MONOMIAL_COUNT}, got {matrix.shape}")
        if not np.all(np.isfinite(matrix)):
            raise ValueError("ColorTransform entries must be finite")
        matrix.setflags(write=False)
        object.__setattr__(self, "matrix", matrix)

    @classmethod
    def identity(cls) -> "ColorTransform":
        return cls.from_affine(np.hstack([np.eye(3), np.zeros((3, 1))]))

    @classmethod
    def from_affine(cls, affine: np.ndarray) -> "ColorTransform":
        """Embed a 3×4 affine map; second-order coefficients are zero"""
        affine = np.asarray(affine, dtype=np.float64)
        if affine.shape != (3, 4):
            raise ShapeError(f"Affine colour map must be 3×4, got {affine.shape}")
        matrix = np.zeros((3, MONOMIAL_COUNT))
        matrix[:, AFFINE_INDICES] = affine
        return cls(matrix)

    @classmethod
    def from_tensor(cls, tensor: Tensor) -> "ColorTransform":
        return cls(tensor.data.reshape(3, MONOMIAL_COUNT))

    def flatten(self) -> np.ndarray:
        return self.matrix.reshape(-1).copy()


def monomials(pixel: Sequence[float]) -> np.ndarray:
    """The 10 monomials of one (r, g, b) pixel"""
    r, g, b = (float(v) for v in pixel)
    extended = np.array([r, g, b, 1.0])
    return np.array([extended[i] * extended[j] for i, j in _PAIRS])


def monomial_features(rgb) -> Tensor:
    """H×W×3 image to its H×W×10 monomial map"""
    rgb = ops.lift(rgb)
    if rgb.ndim != 3 or rgb.shape[2] != 3:
        raise ShapeError(f"monomial_features expects an H×W×3 image, got shape {rgb.shape}")
    extended = np.concatenate([rgb.data, np.ones(rgb.shape[:2] + (1,))], axis=-1)
    value = np.stack([extended[..., i] * extended[..., j] for i, j in _PAIRS], axis=-1)

    def vjp(g):
        grad = np.zeros(rgb.shape[:2] + (4,))
        for k, (i, j) in enumerate(_PAIRS):
            grad[..., i] += g[..., k] * extended[..., j]
            grad[..., j] += g[..., k] * extended[..., i]
        return (grad[..., :3],)

    return apply_op("monomials", value, (rgb,), vjp)


def apply_quadratic_transform(rgb, transform: Union[ColorTransform, Tensor], clamp: bool = False) -> Tensor:
    """Per-pixel W · monomials(pixel), optionally clamped to [0,1]"""
    weights = ops.lift(transform.matrix) if isinstance(transform, ColorTransform) else transform
    if weights.shape != (3, MONOMIAL_COUNT):
        raise ShapeError(f"Colour transform must be 3×{MONOMIAL_COUNT}, got {weights.shape}")
    out = ops.channel_mix(monomial_features(rgb), weights)
    return ops.clamp(out, 0.0, 1.0) if clamp else out
