"""sRGB transfer curve and a differentiable sRGB -> CIELAB (D65) conversion."""

import logging

import numpy as np

from ..autodiff import ops
from ..autodiff.tensor import Tensor, apply_op, branch
from ..core.errors import ShapeError

logger = logging.getLogger(__name__)

SRGB_KNEE = 0.04045
LINEAR_KNEE = 0.0031308

# Linear sRGB -> XYZ, D65. Rows are divided by their sums so that the white
# point maps to (1, 1, 1) and neutral greys give a = b = 0.
_SRGB_TO_XYZ = np.array(
    [
        [0.4124564, 0.3575761, 0.1804375],
        [0.2126729, 0.7151522, 0.0721750],
        [0.0193339, 0.1191920, 0.9503041],
    ]
)
WHITE_POINT = _SRGB_TO_XYZ.sum(axis=1)
_XYZ_NORMALIZED = _SRGB_TO_XYZ / WHITE_POINT[:, None]

_DELTA = 6.0 / 29.0
_F_KNEE = _DELTA**3
_F_SLOPE = 1.0 / (3.0 * _DELTA**2)


def srgb_decode(encoded: np.ndarray) -> np.ndarray:
    """Gamma-encoded sRGB in [0,1] to linear intensity"""
    c = np.clip(np.asarray(encoded, dtype=np.float64), 0.0, 1.0)
    return np.where(c <= SRGB_KNEE, c / 12.92, ((c + 0.055) / 1.055) ** 2.4)


def srgb_encode(linear: np.ndarray) -> np.ndarray:
    """Linear intensity in [0,1] to gamma-encoded sRGB"""
    c = np.clip(np.asarray(linear, dtype=np.float64), 0.0, 1.0)
    return np.where(c <= LINEAR_KNEE, 12.92 * c, 1.055 * c ** (1.0 / 2.4) - 0.055)


def rgb_to_lab(rgb) -> Tensor:
    """H×W×3 sRGB to CIELAB.

    Inputs are clamped to [0,1] first (zero gradient where clamped), then
    gamma-expanded, mapped to XYZ and through the CIE f(t) curve.
    """
    rgb = ops.lift(rgb)
    if rgb.ndim < 1 or rgb.shape[-1] != 3:
        raise ShapeError(f"rgb_to_lab expects a trailing channel axis of 3, got shape {rgb.shape}")
    x = rgb.data

    side = branch((rgb,), np.where(x < 0.0, -1, np.where(x > 1.0, 1, 0)).astype(np.int8))
    inside = side == 0
    c = np.where(inside, x, np.where(side < 0, 0.0, 1.0))

    gamma_linear = branch((rgb,), c <= SRGB_KNEE)
    base = (c + 0.055) / 1.055
    lin = np.where(gamma_linear, c / 12.92, np.sign(base) * np.abs(base) ** 2.4)
    dlin = np.where(gamma_linear, 1.0 / 12.92, (2.4 / 1.055) * np.abs(base) ** 1.4)

    t = lin @ _XYZ_NORMALIZED.T
    f_linear = branch((rgb,), t <= _F_KNEE)
    root = np.cbrt(t)
    f = np.where(f_linear, t * _F_SLOPE + 4.0 / 29.0, root)
    with np.errstate(divide="ignore"):
        df = np.where(f_linear, _F_SLOPE, 1.0 / (3.0 * np.where(f_linear, 1.0, root) ** 2))

    fx, fy, fz = f[..., 0], f[..., 1], f[..., 2]
    lab = np.stack([116.0 * fy - 16.0, 500.0 * (fx - fy), 200.0 * (fy - fz)], axis=-1)

    def vjp(g):
        g_l, g_a, g_b = g[..., 0], g[..., 1], g[..., 2]
        g_f = np.stack([500.0 * g_a, 116.0 * g_l - 500.0 * g_a + 200.0 * g_b, -200.0 * g_b], axis=-1)
        g_lin = (g_f * df) @ _XYZ_NORMALIZED
        return (np.where(inside, g_lin * dlin, 0.0),)

    return apply_op("rgb_to_lab", lab, (rgb,), vjp)


def luminance(lab) -> Tensor:
    """L channel of an H×W×3 Lab image, divided by 100 (H×W×1)"""
    lab = ops.lift(lab)
    return ops.mul(ops.slice_channels(lab, 0, 1), 0.01)
