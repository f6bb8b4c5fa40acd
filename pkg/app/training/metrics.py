"""Evaluation metrics and the per-image report."""

import csv
import logging
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Dict, List, Literal

import numpy as np

from ..core.errors import ShapeError
from ..core.schemas import LossConfig
from ..imaging.color import luminance, rgb_to_lab, srgb_encode
from .losses import DEFAULT_LOSS, ms_ssim

logger = logging.getLogger(__name__)

PSNR_CAP = 99.0
Space = Literal["linear", "srgb"]
REPORT_COLUMNS = ("image", "tag", "psnr_linear", "psnr_srgb", "ms_ssim")


def psnr(a: np.ndarray, b: np.ndarray, space: Space = "linear") -> float:
    """10·log10(1/MSE) over all channels, peak 1.0; identical images give 99 dB"""
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    if a.shape != b.shape:
        raise ShapeError(f"psnr: shapes {a.shape} and {b.shape} differ")
    if space == "srgb":
        a, b = srgb_encode(a), srgb_encode(b)
    elif space != "linear":
        raise ValueError(f"psnr: unknown space '{space}'")
    mse = float(np.mean((a - b) ** 2))
    if mse == 0.0:
        return PSNR_CAP
    return min(PSNR_CAP, 10.0 * math.log10(1.0 / mse))


def msssim_metric(a: np.ndarray, b: np.ndarray, cfg: LossConfig = DEFAULT_LOSS) -> float:
    """MS-SSIM between the Lab luminance channels of two RGB images"""
    return ms_ssim(luminance(rgb_to_lab(a)), luminance(rgb_to_lab(b)), cfg).item()


@dataclass
class EvalRow:
    image: str
    tag: str
    psnr_linear: float
    psnr_srgb: float
    ms_ssim: float


@dataclass
class EvalReport:
    """Per-image rows plus per-tag arithmetic means"""

    rows: List[EvalRow] = field(default_factory=list)
    runtime_s: float = 0.0
    fingerprint: str = ""

    def add(
        self, image: str, tag: str, prediction: np.ndarray, target: np.ndarray, cfg: LossConfig = DEFAULT_LOSS
    ) -> EvalRow:
        row = EvalRow(
            image=image,
            tag=tag,
            psnr_linear=psnr(prediction, target, "linear"),
            psnr_srgb=psnr(prediction, target, "srgb"),
            ms_ssim=msssim_metric(prediction, target, cfg),
        )
        self.rows.append(row)
        return row

    @property
    def tags(self) -> List[str]:
        return list(dict.fromkeys(row.tag for row in self.rows))

    def aggregate(self, tag: str) -> Dict[str, float]:
        selected = [row for row in self.rows if row.tag == tag]
        if not selected:
            raise ValueError(f"No rows tagged '{tag}'")
        return {
            "psnr_linear": float(np.mean([row.psnr_linear for row in selected])),
            "psnr_srgb": float(np.mean([row.psnr_srgb for row in selected])),
            "ms_ssim": float(np.mean([row.ms_ssim for row in selected])),
        }

    def to_csv(self, path: Path) -> Path:
        path = Path(path)
        path.parent.mkdir(parents=True, exist_ok=True)
        with path.open("w", newline="", encoding="utf-8") as handle:
            writer = csv.writer(handle)
            writer.writerow(REPORT_COLUMNS)
            for row in self.rows:
                writer.writerow([row.image, row.tag, repr(row.psnr_linear), repr(row.psnr_srgb), repr(row.ms_ssim)])
            for tag in self.tags:
                means = self.aggregate(tag)
                writer.writerow(["mean", tag, *(repr(means[key]) for key in ("psnr_linear", "psnr_srgb", "ms_ssim"))])
        logger.info(f"Wrote evaluation report with {len(self.rows)} rows to {path}")
        return path

    def summary(self) -> str:
        lines = [f"Evaluation of {len(self.rows)} image rows in {self.runtime_s:.2f}s (config {self.fingerprint or 'n/a'})"]
        for tag in self.tags:
            means = self.aggregate(tag)
            lines.append(
                f"  {tag:>10}: PSNR linear {means['psnr_linear']:.2f} dB | "
                f"sRGB {means['psnr_srgb']:.2f} dB | MS-SSIM {means['ms_ssim']:.4f}"
            )
        return "\n".join(lines)
