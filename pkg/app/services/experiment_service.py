"""Depth/width sweeps and matched-budget ablations built on the trainer."""

import csv
import logging
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Dict, List, Literal, Optional, Sequence

from ..core.config import settings
from ..core.schemas import TrainConfig
from .trainer_service import DataSplits, TrainerService, build_datasets

logger = logging.getLogger(__name__)

SweepAxis = Literal["depth", "width"]
AblationMode = Literal["no_skip", "no_shared"]

_AXIS_FIELDS = {"depth": "n_ll", "width": "width"}
SWEEP_COLUMNS = ("value", "val_psnr", "val_msssim", "final_train_loss")
ABLATION_COLUMNS = ("arm", "final_train_loss", "val_loss", "val_psnr", "val_msssim", "parameters")


def _cell(value: Optional[float]) -> str:
    return "" if value is None else repr(float(value))


@dataclass
class AblationSummary:
    mode: str
    rows: List[Dict[str, Any]] = field(default_factory=list)

    @property
    def final_loss_ratio(self) -> Optional[float]:
        """Ablated arm's final training loss over the intact arm's"""
        losses = {row["arm"]: row["final_train_loss"] for row in self.rows}
        intact, ablated = losses.get("baseline"), losses.get(self.mode)
        if intact is None or ablated is None or intact == 0:
            return None
        return ablated / intact

    def text(self) -> str:
        lines = [f"Ablation {self.mode}"]
        for row in self.rows:
            lines.append(
                f"  {row['arm']:>10}: final train loss {_cell(row['final_train_loss']) or 'n/a'}, "
                f"val PSNR {_cell(row['val_psnr']) or 'n/a'}, {row['parameters']} parameters"
            )
        ratio = self.final_loss_ratio
        lines.append(f"final_loss_ratio={ratio!r}" if ratio is not None else "final_loss_ratio=n/a")
        return "\n".join(lines)


class ExperimentService:
    """Service training families of matched configurations on shared data"""

    def __init__(self, config: TrainConfig, progress: bool = True):
        self.config = config
        self.progress = progress
        self.output_dir = settings.resolve_output(config.output_dir)
        self._data: Optional[DataSplits] = None

    @property
    def data(self) -> DataSplits:
        if self._data is None:
            self._data = build_datasets(self.config, progress=self.progress)
        return self._data

    def variant(self, subdir: str, **changes) -> TrainConfig:
        """The base config with ``changes`` applied, writing under ``subdir``"""
        values = self.config.model_dump()
        values.update(changes)
        values["output_dir"] = Path(self.config.output_dir) / subdir
        return TrainConfig.model_validate(values)

    def train_arm(self, config: TrainConfig) -> Dict[str, Any]:
        trainer = TrainerService(config, progress=self.progress)
        result = trainer.run(data=self.data)
        metrics = trainer.validate(result.params, self.data.val)
        return {
            "final_train_loss": result.final_train_loss,
            "parameters": result.params.parameter_count,
            **metrics,
        }

    def sweep(self, axis: SweepAxis, values: Sequence[int]) -> Path:
        """Train one model per value and tabulate the final validation metrics

        Args:
            axis (SweepAxis): "depth" varies the number of blocks, "width" the channels per block
            values (Sequence[int]): Settings to train

        Returns:
            Path: The sweep CSV
        """
        if not values:
            raise ValueError("sweep needs at least one value")
        if axis not in _AXIS_FIELDS:
            raise ValueError(f"Unknown sweep axis '{axis}'")
        field_name = _AXIS_FIELDS[axis]
        rows = []
        for value in values:
            logger.info(f"Sweep {axis}: training {field_name}={value}")
            outcome = self.train_arm(self.variant(f"{axis}_{value}", **{field_name: int(value)}))
            rows.append({"value": int(value), **outcome})

        path = self.output_dir / f"sweep_{axis}.csv"
        path.parent.mkdir(parents=True, exist_ok=True)
        with path.open("w", newline="", encoding="utf-8") as handle:
            writer = csv.writer(handle)
            writer.writerow(SWEEP_COLUMNS)
            for row in rows:
                writer.writerow(
                    [row["value"], _cell(row["val_psnr"]), _cell(row["val_msssim"]), _cell(row["final_train_loss"])]
                )
        logger.info(f"Wrote {axis} sweep over {list(values)} to {path}")
        return path

    def ablate(self, mode: AblationMode) -> AblationSummary:
        """Train the intact model and the ablated one with identical seed and budget"""
        if mode not in ("no_skip", "no_shared"):
            raise ValueError(f"Unknown ablation '{mode}'")
        if mode == "no_shared" and not self.config.uses_highlevel:
            raise ValueError("The no_shared ablation needs a task with a high-level stage")

        summary = AblationSummary(mode)
        for arm, flag in (("baseline", False), (mode, True)):
            logger.info(f"Ablation {mode}: training arm '{arm}'")
            outcome = self.train_arm(self.variant(f"ablation_{mode}/{arm}", **{mode: flag}))
            summary.rows.append({"arm": arm, **outcome})

        path = self.output_dir / f"ablation_{mode}.csv"
        path.parent.mkdir(parents=True, exist_ok=True)
        with path.open("w", newline="", encoding="utf-8") as handle:
            writer = csv.writer(handle)
            writer.writerow(ABLATION_COLUMNS)
            for row in summary.rows:
                writer.writerow(
                    [
                        row["arm"],
                        _cell(row["final_train_loss"]),
                        _cell(row["val_loss"]),
                        _cell(row["val_psnr"]),
                        _cell(row["val_msssim"]),
                        row["parameters"],
                    ]
                )
        (self.output_dir / f"ablation_{mode}.txt").write_text(summary.text() + "\n", encoding="utf-8")
        logger.info(summary.text())
        return summary
