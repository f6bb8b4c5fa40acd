"""Shared fixtures: seeded generators, tiny architectures and an isolated output root."""

from pathlib import Path

import numpy as np
import pytest

from app.core.config import settings
from app.core.schemas import ModelConfig, TrainConfig


# =============================================================================
# Randomness and architectures
# =============================================================================


@pytest.fixture
def rng():
    """Seeded generator so every test sees the same draws."""
    return np.random.default_rng(1234)


@pytest.fixture
def tiny_isp_config():
    """Two residual blocks and one high-level stage (minimum side 4)."""
    return ModelConfig(n_ll=2, n_hl=1, width=8, hl_width=4)


@pytest.fixture
def tiny_denoise_config():
    """Low-level stage only, as in the joint denoise/demosaic task."""
    return ModelConfig(n_ll=2, n_hl=0, width=8, highlevel=False)


# =============================================================================
# Output locations
# =============================================================================


@pytest.fixture(autouse=True)
def output_root(tmp_path, monkeypatch):
    """Point DEEPISP_OUTPUT_ROOT at a per-test directory."""
    root = tmp_path / "runs"
    monkeypatch.setattr(settings, "DEEPISP_OUTPUT_ROOT", root)
    return root


@pytest.fixture
def tiny_train_config():
    """Denoise/demosaic experiment small enough to train in a second."""
    return TrainConfig(
        task="denoise_demosaic",
        n_ll=2,
        width=8,
        epochs=2,
        synth_count=6,
        synth_height=32,
        synth_width=32,
        checkpoint_every=1,
        output_dir=Path("tiny"),
    )


@pytest.fixture
def tiny_isp_train_config():
    """Full-ISP experiment (quarter exposure) on 32×32 scenes."""
    return TrainConfig(
        task="full_isp",
        n_ll=2,
        n_hl=1,
        width=8,
        hl_width=4,
        epochs=2,
        synth_count=6,
        synth_height=32,
        synth_width=32,
        checkpoint_every=1,
        output_dir=Path("tiny_isp"),
    )
