"""Exception hierarchy shared by every DeepISP module.

Each error also derives from the built-in exception it refines, so callers that
catch ``ValueError`` / ``OSError`` keep working.
"""

from typing import Optional


class DeepISPError(Exception):
    """Base class for all toolkit errors"""


class ShapeError(DeepISPError, ValueError):
    """Extents, channel counts or dimensions do not agree"""


class GraphError(DeepISPError, RuntimeError):
    """Misuse of the differentiation graph"""


class NonFiniteGradientError(DeepISPError, ValueError):
    """An optimizer step was asked to apply a NaN/Inf gradient"""

    def __init__(self, parameter: str):
        self.parameter = parameter
        super().__init__(f"Non-finite gradient for parameter '{parameter}'; step rejected")


class ImageIOError(DeepISPError, OSError):
    """An image file could not be read or written"""


class DatasetError(DeepISPError, OSError):
    """A dataset directory is missing or does not match its declared layout"""


class CheckpointError(DeepISPError, OSError):
    """A checkpoint file is malformed, truncated or incompatible"""


class TrainingAbortedError(DeepISPError, RuntimeError):
    """Training stopped because the loss became non-finite"""

    def __init__(self, epoch: int, step: int, last_checkpoint: Optional[str]):
        self.epoch = epoch
        self.step = step
        self.last_checkpoint = last_checkpoint
        kept = last_checkpoint if last_checkpoint else "none written yet"
        super().__init__(
            f"Non-finite loss at epoch {epoch}, step {step}; last good checkpoint: {kept}"
        )
