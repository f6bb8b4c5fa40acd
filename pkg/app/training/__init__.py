from .losses import DEFAULT_LOSS, combined_loss, l2_loss, ms_ssim, ssim_map
from .metrics import EvalReport, EvalRow, msssim_metric, psnr
from .optimizer import AdamState, adam_step, adam_step_with

__all__ = [
    "DEFAULT_LOSS",
    "combined_loss",
    "l2_loss",
    "ms_ssim",
    "ssim_map",
    "EvalReport",
    "EvalRow",
    "msssim_metric",
    "psnr",
    "AdamState",
    "adam_step",
    "adam_step_with",
]
