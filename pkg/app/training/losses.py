"""Training objectives: L2 for joint denoise/demosaic, Lab-L1 + MS-SSIM for the full ISP."""

import logging
from typing import Optional

from ..autodiff import ops
from ..autodiff.tensor import Tensor
from ..core.errors import ShapeError
from ..core.schemas import LossConfig
from ..imaging.color import luminance, rgb_to_lab

logger = logging.getLogger(__name__)

DEFAULT_LOSS = LossConfig()


def _same_shape(a: Tensor, b: Tensor, op: str) -> None:
    if a.shape != b.shape:
        raise ShapeError(f"{op}: shapes {a.shape} and {b.shape} differ")


def ssim_map(a, b, window: int = 5, c1: float = DEFAULT_LOSS.c1, c2: float = DEFAULT_LOSS.c2) -> Tensor:
    """Per-pixel SSIM of two H×W×1 maps over a uniform window (reflect borders)"""
    a, b = ops.lift(a), ops.lift(b)
    _same_shape(a, b, "ssim_map")
    mu_a = ops.box_filter(a, window)
    mu_b = ops.box_filter(b, window)
    var_a = ops.box_filter(ops.square(a), window) - ops.square(mu_a)
    var_b = ops.box_filter(ops.square(b), window) - ops.square(mu_b)
    cov = ops.box_filter(a * b, window) - mu_a * mu_b
    numerator = (2.0 * mu_a * mu_b + c1) * (2.0 * cov + c2)
    denominator = (ops.square(mu_a) + ops.square(mu_b) + c1) * (var_a + var_b + c2)
    return numerator / denominator


def ms_ssim(a, b, cfg: LossConfig = DEFAULT_LOSS) -> Tensor:
    """Product over scales of the mean SSIM; coarser scales by 2×2 mean-downsampling"""
    a, b = ops.lift(a), ops.lift(b)
    _same_shape(a, b, "ms_ssim")
    if a.ndim != 3 or min(a.shape[:2]) < cfg.min_extent:
        raise ShapeError(
            f"ms_ssim: {cfg.msssim_scales} scales with a {cfg.msssim_window}×{cfg.msssim_window} "
            f"window need H, W >= {cfg.min_extent}, got {a.shape}"
        )
    value: Optional[Tensor] = None
    for scale in range(cfg.msssim_scales):
        if scale:
            a = ops.pool(a, "mean2x2")
            b = ops.pool(b, "mean2x2")
        level = ops.mean(ssim_map(a, b, cfg.msssim_window, cfg.c1, cfg.c2))
        value = level if value is None else value * level
    return value


def combined_loss(pred_rgb, target_rgb, cfg: LossConfig = DEFAULT_LOSS) -> Tensor:
    """(1 - alpha) * mean |Lab(pred) - Lab(target)| + alpha * (1 - MS-SSIM on L)"""
    pred_rgb, target_rgb = ops.lift(pred_rgb), ops.lift(target_rgb)
    _same_shape(pred_rgb, target_rgb, "combined_loss")
    lab_pred = rgb_to_lab(pred_rgb)
    lab_target = rgb_to_lab(target_rgb)
    l1 = ops.mean(ops.abs_(lab_pred - lab_target))
    if cfg.alpha == 0.0:
        return l1
    structural = 1.0 - ms_ssim(luminance(lab_pred), luminance(lab_target), cfg)
    return (1.0 - cfg.alpha) * l1 + cfg.alpha * structural


def l2_loss(pred, target) -> Tensor:
    """Mean squared error over all elements"""
    pred, target = ops.lift(pred), ops.lift(target)
    _same_shape(pred, target, "l2_loss")
    return ops.mean(ops.square(pred - target))
