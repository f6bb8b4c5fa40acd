import logging
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Dict, List, NamedTuple, Optional, Tuple

import numpy as np
from tqdm import tqdm

from ..autodiff.tensor import Graph, Tensor, backward
from ..core.config import settings
from ..core.errors import CheckpointError, DatasetError, NonFiniteGradientError, ShapeError, TrainingAbortedError
from ..core.schemas import TrainConfig
from ..data.loaders import load_pair_dir
from ..data.pairs import Dataset, ImagePair, split_dataset
from ..data.patches import example_seed, sample_patch
from ..data.scenes import synthesize_dataset
from ..handlers.training_handler import TrainingEvent, TrainingEventHandler
from ..model.initialization import init_params, init_w_affine
from ..model.network import BoundParams, ModelParams, deepisp_forward
from ..training.losses import combined_loss, l2_loss
from ..training.metrics import msssim_metric, psnr
from ..training.optimizer import AdamState, adam_step_with
from .checkpoint_service import Checkpoint, CheckpointService

logger = logging.getLogger(__name__)

CONFIG_NAME = "config.json"
LOG_NAME = "train_log.csv"


class DataSplits(NamedTuple):
    train: Dataset
    val: Dataset
    test: Dataset


@dataclass(eq=False)
class TrainingResult:
    params: ModelParams
    adam: AdamState
    epoch: int
    checkpoint_path: Path
    history: List[Dict[str, Any]] = field(default_factory=list)

    @property
    def final_train_loss(self) -> Optional[float]:
        return self.history[-1]["train_loss"] if self.history else None


def build_datasets(config: TrainConfig, progress: bool = False) -> DataSplits:
    """Training, validation and test sets described by the config"""
    if config.data_source == "synth":
        dataset = synthesize_dataset(
            config.synth_count,
            seed=config.seed,
            height=config.synth_height,
            width=config.synth_width,
            task=config.task,
            sigma_range=config.sigma_range(),
            exposure=config.exposure,
            pattern=config.pattern,
            progress=progress,
        )
        return DataSplits(*split_dataset(dataset, config.val_fraction, config.test_fraction, config.seed))

    variant = "low_light" if config.exposure < 1.0 else "well_lit"
    if config.layout == "msr" and (Path(config.data_dir) / "train.txt").exists():
        return DataSplits(
            *(
                load_pair_dir(config.data_dir, "msr", split=split, pattern=config.pattern)
                for split in ("train", "val", "test")
            )
        )
    dataset = load_pair_dir(config.data_dir, config.layout, variant=variant, pattern=config.pattern)
    return DataSplits(*split_dataset(dataset, config.val_fraction, config.test_fraction, config.seed))


class TrainerService:
    """Service running the training loop of one experiment"""

    def __init__(self, config: TrainConfig, handler: Optional[TrainingEventHandler] = None, progress: bool = True):
        self.config = config
        self.output_dir = settings.resolve_output(config.output_dir)
        self.handler = handler if handler is not None else TrainingEventHandler(self.output_dir / LOG_NAME)
        self.checkpoints = CheckpointService(self.output_dir)
        self.model_config = config.to_model_config()
        self.loss_config = config.to_loss_config()
        self.adam_config = config.to_adam_config()
        self.progress = progress

    def forward(self, bound: BoundParams, rgb, clamp_output: bool = False) -> Tensor:
        return deepisp_forward(
            rgb,
            bound,
            ablate_shared=self.config.no_shared,
            ablate_skip=self.config.no_skip,
            clamp_output=clamp_output,
        )

    def loss(self, prediction: Tensor, target) -> Tensor:
        if self.config.task == "denoise_demosaic":
            return l2_loss(prediction, target)
        return combined_loss(prediction, target, self.loss_config)

    def initialize(self, train: Dataset) -> ModelParams:
        """Seeded parameters; ISP tasks start the colour head at the fitted affine map"""
        w_init = None
        if self.model_config.highlevel:
            w_init = init_w_affine(train).transform
        return init_params(self.config.seed, self.model_config, w_init)

    def patch_size_for(self, train: Dataset) -> Optional[int]:
        """Patch side for this dataset, None for whole images"""
        minimum = self.model_config.min_extent
        if self.config.task != "denoise_demosaic":
            minimum = max(minimum, self.loss_config.min_extent)
        smallest = min(min(pair.shape) for pair in train)
        if self.config.patch_size == 0:
            if smallest < minimum:
                raise ShapeError(f"Training images of side {smallest} are below the network minimum {minimum}")
            return None
        size = self.config.patch_size
        if size > smallest:
            size = smallest - smallest % 2
            logger.warning(f"patch_size {self.config.patch_size} exceeds the smallest image side; using {size}")
        if size < minimum:
            raise ShapeError(f"patch_size {size} is below the network minimum {minimum}")
        return size

    def train_step(
        self, params: ModelParams, adam: AdamState, example: ImagePair
    ) -> Tuple[float, ModelParams, AdamState]:
        """One forward/backward pass and Adam update on a single example.

        A non-finite loss is returned with the state unchanged.
        """
        graph = Graph()
        prediction = self.forward(params.bind(graph), example.demosaiced())
        loss = self.loss(prediction, example.target)
        value = loss.item()
        if not math.isfinite(value):
            return value, params, adam
        grads = backward(graph, loss)
        arrays, adam = adam_step_with(self.adam_config, params.arrays, grads, adam)
        return value, params.with_arrays(arrays), adam

    def validate(self, params: ModelParams, val: Dataset) -> Dict[str, Optional[float]]:
        """Mean validation loss, linear PSNR and MS-SSIM (None without validation data)"""
        if not len(val):
            return {"val_loss": None, "val_psnr": None, "val_msssim": None}
        bound = params.bind()
        losses, psnrs, msssims = [], [], []
        for pair in val:
            prediction = self.forward(bound, pair.demosaiced())
            losses.append(self.loss(prediction, pair.target).item())
            clamped = np.clip(prediction.data, 0.0, 1.0)
            psnrs.append(psnr(clamped, pair.target, "linear"))
            if min(pair.shape) >= self.loss_config.min_extent:
                msssims.append(msssim_metric(clamped, pair.target, self.loss_config))
        return {
            "val_loss": float(np.mean(losses)),
            "val_psnr": float(np.mean(psnrs)),
            "val_msssim": float(np.mean(msssims)) if msssims else None,
        }

    def _save(self, params: ModelParams, adam: AdamState, epoch: int) -> Path:
        path = self.checkpoints.save(Checkpoint(params, adam, epoch, self.config.experiment_dict()))
        self.handler.on_event(TrainingEvent("checkpoint_written", epoch, {"path": str(path)}))
        return path

    def _abort(self, epoch: int, step: int, reason: str, cause: Optional[Exception] = None) -> None:
        self.handler.on_event(TrainingEvent("run_aborted", epoch, {"step": step, "reason": reason}))
        raise TrainingAbortedError(epoch, step, self.handler.last_checkpoint) from cause

    def _resume(self) -> Checkpoint:
        checkpoint = self.checkpoints.load()
        if checkpoint.experiment != self.config.experiment_dict():
            saved = checkpoint.train_config.fingerprint() if checkpoint.experiment else "none"
            raise CheckpointError(
                f"Checkpoint {self.checkpoints.latest_path} belongs to experiment {saved}, "
                f"not {self.config.fingerprint()}"
            )
        return checkpoint

    def run(self, resume: bool = False, data: Optional[DataSplits] = None) -> TrainingResult:
        """Train from scratch or resume from the run directory's checkpoint

        Args:
            resume (bool): Continue from the latest checkpoint when one exists
            data (Optional[DataSplits]): Pre-built datasets, built from the config otherwise

        Returns:
            TrainingResult: Final state, history and checkpoint location
        """
        config = self.config
        train, val, _ = data if data is not None else build_datasets(config, progress=self.progress)
        if not len(train):
            raise DatasetError("No training pairs available")
        self.output_dir.mkdir(parents=True, exist_ok=True)
        config.to_file(self.output_dir / CONFIG_NAME)

        resume_epoch = None
        if resume and self.checkpoints.exists():
            checkpoint = self._resume()
            params, adam, start_epoch = checkpoint.params, checkpoint.adam, checkpoint.epoch
            resume_epoch = start_epoch
            checkpoint_path = self.checkpoints.latest_path
            self.handler.last_checkpoint = str(checkpoint_path)
        else:
            if resume:
                logger.warning(f"No checkpoint in {self.output_dir}; starting from scratch")
            params = self.initialize(train)
            adam = AdamState.zeros_like(params.arrays)
            start_epoch = 0

        self.handler.on_event(
            TrainingEvent(
                "run_started",
                start_epoch,
                {
                    "resume_epoch": resume_epoch,
                    "task": config.task,
                    "epochs": config.epochs,
                    "parameters": params.parameter_count,
                    "train_pairs": len(train),
                },
            )
        )
        if resume_epoch is None:
            checkpoint_path = self._save(params, adam, 0)

        patch = self.patch_size_for(train)
        epoch = start_epoch
        bar = tqdm(
            range(start_epoch, config.epochs),
            initial=start_epoch,
            total=config.epochs,
            desc=f"Training {config.task}",
            disable=not self.progress,
        )
        for epoch_index in bar:
            losses = []
            for index, pair in enumerate(train):
                example = sample_patch(
                    pair, patch, example_seed(config.seed, epoch_index, index), config.augment, config.vertical_flip
                )
                try:
                    loss, params, adam = self.train_step(params, adam, example)
                except NonFiniteGradientError as e:
                    self._abort(epoch_index + 1, index, str(e), e)
                if not math.isfinite(loss):
                    self._abort(epoch_index + 1, index, f"loss is {loss}")
                losses.append(loss)

            epoch = epoch_index + 1
            row = {"train_loss": float(np.mean(losses)), **self.validate(params, val)}
            self.handler.on_event(TrainingEvent("epoch_completed", epoch, row))
            bar.set_postfix(loss=f"{row['train_loss']:.4g}")
            if epoch % config.checkpoint_every == 0 or epoch == config.epochs:
                checkpoint_path = self._save(params, adam, epoch)
        bar.close()

        self.handler.on_event(TrainingEvent("run_completed", epoch))
        return TrainingResult(params, adam, epoch, checkpoint_path, list(self.handler.history))
