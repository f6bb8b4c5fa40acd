"""Experiment schemas.

A ``TrainConfig`` fully describes one experiment. Fields left unset are filled
with the per-task defaults of the two training protocols (joint
denoise/demosaic and full ISP) by the model validator, so the resolved config
saved next to a run is complete.
"""

import hashlib
import json
import logging
from pathlib import Path
from typing import Literal, Optional, Tuple

from pydantic import BaseModel, ConfigDict, Field, field_validator, model_validator

from ..imaging.bayer import BayerPattern

logger = logging.getLogger(__name__)

CONFIG_VERSION = 1

Task = Literal["denoise_demosaic", "full_isp", "mimic_isp"]
Layout = Literal["msr", "s7isp", "flat"]


class LossConfig(BaseModel):
    """Weights and window of the Lab-L1 + MS-SSIM objective"""

    model_config = ConfigDict(frozen=True)

    alpha: float = Field(0.5, ge=0.0, le=1.0)
    msssim_scales: int = Field(2, ge=1)
    msssim_window: int = Field(5, ge=1)
    c1: float = Field(0.01**2, gt=0.0)
    c2: float = Field(0.03**2, gt=0.0)

    @field_validator("msssim_window")
    @classmethod
    def _odd_window(cls, value: int) -> int:
        if value % 2 == 0:
            raise ValueError(f"msssim_window must be odd, got {value}")
        return value

    @property
    def min_extent(self) -> int:
        return self.msssim_window * 2 ** (self.msssim_scales - 1)


class ModelConfig(BaseModel):
    """Architecture hyperparameters"""

    model_config = ConfigDict(frozen=True)

    n_ll: int = Field(15, ge=1)
    n_hl: int = Field(3, ge=0)
    width: int = Field(64, ge=4)
    hl_width: Optional[int] = Field(None, ge=1)
    highlevel: bool = True

    @property
    def highlevel_width(self) -> int:
        """Channels of each strided high-level convolution (defaults to the low-level width)"""
        return self.hl_width if self.hl_width is not None else self.width

    @property
    def features(self) -> int:
        """Feed-forward feature channels per block (the rest carry the image)"""
        return self.width - 3

    @property
    def min_extent(self) -> int:
        """Smallest image side the network accepts"""
        return max(3, 4**self.n_hl) if self.highlevel else 3


class AdamConfig(BaseModel):
    model_config = ConfigDict(frozen=True)

    lr: float = Field(5e-5, gt=0.0)
    beta1: float = Field(0.9, ge=0.0, lt=1.0)
    beta2: float = Field(0.999, ge=0.0, lt=1.0)
    eps: float = Field(1e-8, gt=0.0)


_TASK_DEFAULTS = {
    "denoise_demosaic": {"n_ll": 20, "n_hl": 0, "epochs": 5000, "patch_size": 0, "exposure": 1.0, "vertical_flip": True},
    "full_isp": {"n_ll": 15, "n_hl": 3, "epochs": 700, "patch_size": 1024, "exposure": 0.25, "vertical_flip": False},
    "mimic_isp": {"n_ll": 15, "n_hl": 3, "epochs": 700, "patch_size": 1024, "exposure": 1.0, "vertical_flip": False},
}


class TrainConfig(BaseModel):
    """Complete description of one training experiment"""

    model_config = ConfigDict(extra="forbid")

    version: int = CONFIG_VERSION
    task: Task = "denoise_demosaic"

    # Architecture
    n_ll: Optional[int] = Field(None, ge=1)
    n_hl: Optional[int] = Field(None, ge=0)
    width: int = Field(64, ge=4)
    hl_width: Optional[int] = Field(None, ge=1)

    # Objective
    alpha: float = Field(0.5, ge=0.0, le=1.0)
    msssim_scales: int = Field(2, ge=1)
    msssim_window: int = Field(5, ge=1)

    # Optimizer
    lr: float = Field(5e-5, gt=0.0)
    beta1: float = Field(0.9, ge=0.0, lt=1.0)
    beta2: float = Field(0.999, ge=0.0, lt=1.0)
    eps: float = Field(1e-8, gt=0.0)

    # Schedule; patch_size 0 trains on whole images
    epochs: Optional[int] = Field(None, ge=0)
    patch_size: Optional[int] = Field(None, ge=0)
    seed: int = 0
    augment: bool = True
    vertical_flip: Optional[bool] = None
    checkpoint_every: int = Field(50, ge=1)

    # Data
    data_source: Literal["synth", "dir"] = "synth"
    data_dir: Optional[Path] = None
    layout: Layout = "flat"
    synth_count: int = Field(200, ge=0)
    synth_height: int = Field(64, ge=32)
    synth_width: int = Field(64, ge=32)
    sigma_min: float = Field(1.0, ge=0.0, le=10.0)
    sigma_max: float = Field(10.0, ge=0.0, le=10.0)
    exposure: Optional[float] = Field(None, gt=0.0, le=1.0)
    pattern: BayerPattern = BayerPattern.RGGB
    val_fraction: float = Field(0.1, ge=0.0, lt=1.0)
    test_fraction: float = Field(0.1, ge=0.0, lt=1.0)

    # Ablations
    no_skip: bool = False
    no_shared: bool = False

    # Outputs, relative paths resolve against DEEPISP_OUTPUT_ROOT
    output_dir: Path = Path("run")

    @model_validator(mode="after")
    def _apply_task_defaults(self) -> "TrainConfig":
        for name, value in _TASK_DEFAULTS[self.task].items():
            if getattr(self, name) is None:
                setattr(self, name, value)
        if self.version != CONFIG_VERSION:
            raise ValueError(f"Unsupported config version {self.version} (expected {CONFIG_VERSION})")
        if self.sigma_min > self.sigma_max:
            raise ValueError(f"sigma_min {self.sigma_min} exceeds sigma_max {self.sigma_max}")
        if self.patch_size and self.patch_size % 2:
            raise ValueError(f"patch_size must be even to keep the Bayer phase, got {self.patch_size}")
        if self.data_source == "dir" and self.data_dir is None:
            raise ValueError("data_source 'dir' requires data_dir")
        if self.val_fraction + self.test_fraction >= 1.0:
            raise ValueError("val_fraction + test_fraction must leave training data")
        return self

    @property
    def uses_highlevel(self) -> bool:
        return self.task != "denoise_demosaic"

    def to_model_config(self) -> ModelConfig:
        return ModelConfig(
            n_ll=self.n_ll, n_hl=self.n_hl, width=self.width, hl_width=self.hl_width, highlevel=self.uses_highlevel
        )

    def to_loss_config(self) -> LossConfig:
        return LossConfig(alpha=self.alpha, msssim_scales=self.msssim_scales, msssim_window=self.msssim_window)

    def to_adam_config(self) -> AdamConfig:
        return AdamConfig(lr=self.lr, beta1=self.beta1, beta2=self.beta2, eps=self.eps)

    def sigma_range(self) -> Tuple[float, float]:
        return self.sigma_min, self.sigma_max

    def experiment_dict(self) -> dict:
        """Everything that determines the trained state (run length and paths excluded)"""
        return self.model_dump(mode="json", exclude={"epochs", "output_dir", "checkpoint_every"})

    def fingerprint(self) -> str:
        payload = json.dumps(self.experiment_dict(), sort_keys=True).encode("utf-8")
        return hashlib.sha256(payload).hexdigest()[:12]

    @classmethod
    def from_file(cls, path: Path) -> "TrainConfig":
        logger.info(f"Loading experiment config from {path}")
        return cls.model_validate_json(Path(path).read_text(encoding="utf-8"))

    def to_file(self, path: Path) -> Path:
        path = Path(path)
        path.parent.mkdir(parents=True, exist_ok=True)
        path.write_text(self.model_dump_json(indent=2) + "\n", encoding="utf-8")
        return path
