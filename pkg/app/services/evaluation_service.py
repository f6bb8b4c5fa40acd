import logging
import time
from typing import Optional

import numpy as np

from ..core.schemas import LossConfig
from ..data.pairs import Dataset
from ..training.losses import DEFAULT_LOSS
from ..training.metrics import EvalReport
from .inference_service import InferenceService

logger = logging.getLogger(__name__)


class EvaluationService:
    """Service scoring a model (and optionally the bilinear baseline) against targets"""

    def __init__(self, inference: Optional[InferenceService] = None, loss_config: LossConfig = DEFAULT_LOSS):
        self.inference = inference
        self.loss_config = loss_config

    def evaluate(self, dataset: Dataset, baseline: bool = True, fingerprint: str = "") -> EvalReport:
        """Score every pair

        Args:
            dataset (Dataset): Pairs to evaluate, any source
            baseline (bool): Also score the bilinear-demosaic input, tagged "baseline"
            fingerprint (str): Config fingerprint recorded in the report

        Returns:
            EvalReport: Rows tagged "model" and/or "baseline"
        """
        start = time.perf_counter()
        report = EvalReport(fingerprint=fingerprint)
        for index, pair in enumerate(dataset):
            name = pair.name or f"{index:04d}"
            rgb = pair.demosaiced()
            if self.inference is not None:
                report.add(name, "model", self.inference.process(rgb), pair.target, self.loss_config)
            if baseline:
                report.add(name, "baseline", np.clip(rgb, 0.0, 1.0), pair.target, self.loss_config)
        report.runtime_s = time.perf_counter() - start
        logger.info(f"Evaluated {len(dataset)} pairs in {report.runtime_s:.2f}s")
        return report
