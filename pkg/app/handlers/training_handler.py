import csv
import logging
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Dict, List, Literal, Optional

logger = logging.getLogger(__name__)

EventKind = Literal["run_started", "epoch_completed", "checkpoint_written", "run_aborted", "run_completed"]
LOG_COLUMNS = ("epoch", "train_loss", "val_loss", "val_psnr", "val_msssim")


@dataclass
class TrainingEvent:
    kind: EventKind
    epoch: int
    data: Dict[str, Any] = field(default_factory=dict)


def _cell(value: Optional[float]) -> str:
    return "" if value is None else repr(float(value))


class TrainingEventHandler:
    """Event handler for a training run: keeps the history and the CSV log"""

    def __init__(self, log_path: Optional[Path] = None):
        self.log_path = Path(log_path) if log_path is not None else None
        self.history: List[Dict[str, Any]] = []
        self.last_checkpoint: Optional[str] = None
        self.is_complete = False
        self.aborted: Optional[TrainingEvent] = None

    def _prepare_log(self, resume_epoch: Optional[int]) -> None:
        """Start a fresh log, or on resume keep only the rows up to the checkpoint epoch"""
        if self.log_path is None:
            return
        self.log_path.parent.mkdir(parents=True, exist_ok=True)
        kept: List[List[str]] = []
        if resume_epoch is not None and self.log_path.exists():
            with self.log_path.open(newline="", encoding="utf-8") as handle:
                rows = list(csv.reader(handle))
            kept = [row for row in rows[1:] if row and int(row[0]) <= resume_epoch]
            dropped = len(rows) - 1 - len(kept)
            if dropped:
                logger.info(f"Dropped {dropped} log rows after epoch {resume_epoch}")
        with self.log_path.open("w", newline="", encoding="utf-8") as handle:
            writer = csv.writer(handle)
            writer.writerow(LOG_COLUMNS)
            writer.writerows(kept)

    def _append(self, row: Dict[str, Any]) -> None:
        if self.log_path is None:
            return
        with self.log_path.open("a", newline="", encoding="utf-8") as handle:
            csv.writer(handle).writerow(
                [
                    row["epoch"],
                    _cell(row["train_loss"]),
                    _cell(row.get("val_loss")),
                    _cell(row.get("val_psnr")),
                    _cell(row.get("val_msssim")),
                ]
            )

    def on_event(self, event: TrainingEvent) -> None:
        """Handle the different kinds of training events"""
        logger.debug(f"Received training event: {event.kind} (epoch {event.epoch})")

        if event.kind == "run_started":
            self._prepare_log(event.data.get("resume_epoch"))
            logger.info(
                f"Training {event.data.get('task')} from epoch {event.epoch} to {event.data.get('epochs')} "
                f"({event.data.get('parameters')} parameters, {event.data.get('train_pairs')} training pairs)"
            )

        elif event.kind == "epoch_completed":
            row = {"epoch": event.epoch, **event.data}
            self.history.append(row)
            self._append(row)
            val_psnr = row.get("val_psnr")
            val_text = f", val PSNR {val_psnr:.2f} dB" if val_psnr is not None and math.isfinite(val_psnr) else ""
            logger.debug(f"Epoch {event.epoch}: train loss {row['train_loss']:.6g}{val_text}")

        elif event.kind == "checkpoint_written":
            self.last_checkpoint = event.data.get("path")

        elif event.kind == "run_aborted":
            self.aborted = event
            logger.error(
                f"Training aborted at epoch {event.epoch}, step {event.data.get('step')}: "
                f"{event.data.get('reason')}; last good checkpoint {self.last_checkpoint}"
            )

        elif event.kind == "run_completed":
            self.is_complete = True
            logger.info(f"Training completed at epoch {event.epoch}")

        else:
            logger.warning(f"Ignoring unknown training event: {event.kind}")

    @property
    def final(self) -> Optional[Dict[str, Any]]:
        return self.history[-1] if self.history else None
