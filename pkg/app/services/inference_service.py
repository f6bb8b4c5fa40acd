import logging
from pathlib import Path
from typing import List, Optional

import numpy as np

from ..core.errors import ImageIOError, ShapeError
from ..core.schemas import TrainConfig
from ..imaging.bayer import BayerPattern, RawImage, bilinear_demosaic
from ..imaging.image_io import IMAGE_SUFFIXES, read_image, write_image
from ..imaging.stretch import histogram_stretch
from ..model.network import ModelParams, deepisp_forward
from .checkpoint_service import CheckpointService

logger = logging.getLogger(__name__)


class InferenceService:
    """Service running a trained network on raw or demosaiced images"""

    def __init__(self, params: ModelParams, ablate_shared: bool = False, ablate_skip: bool = False):
        self.params = params
        self.ablate_shared = ablate_shared
        self.ablate_skip = ablate_skip
        self._bound = params.bind()

    @classmethod
    def from_checkpoint(cls, path: Path) -> "InferenceService":
        """Load the parameters and ablation flags stored in a checkpoint"""
        path = Path(path)
        checkpoint = CheckpointService(path.parent).load(path)
        config: Optional[TrainConfig] = checkpoint.train_config
        return cls(
            checkpoint.params,
            ablate_shared=bool(config and config.no_shared),
            ablate_skip=bool(config and config.no_skip),
        )

    @property
    def min_extent(self) -> int:
        return self.params.config.min_extent

    def prepare(self, image: np.ndarray, pattern: BayerPattern = BayerPattern.RGGB) -> np.ndarray:
        """Network input for a file's content: raw mosaics are demosaiced, RGB passes through"""
        if image.ndim == 2:
            height, width = image.shape
            return bilinear_demosaic(RawImage(image[: height - height % 2, : width - width % 2], pattern))
        return image

    def process(self, rgb: np.ndarray, stretch: bool = False) -> np.ndarray:
        """Run the network on a demosaiced H×W×3 image

        Args:
            rgb (np.ndarray): Demosaiced input in [0,1]
            stretch (bool): Apply the evaluation histogram stretch to the output

        Returns:
            np.ndarray: Clamped H×W×3 output
        """
        height, width = rgb.shape[:2]
        if min(height, width) < self.min_extent:
            raise ShapeError(
                f"Input of {height}×{width} is below the minimum side {self.min_extent} "
                f"for a network with {self.params.config.n_hl} high-level stages"
            )
        out = deepisp_forward(
            rgb,
            self._bound,
            ablate_shared=self.ablate_shared,
            ablate_skip=self.ablate_skip,
            clamp_output=True,
        ).numpy()
        if stretch:
            out = histogram_stretch(out).image
        return out

    def infer_file(
        self, input_path: Path, output_path: Path, stretch: bool = False, pattern: BayerPattern = BayerPattern.RGGB
    ) -> Path:
        image = read_image(input_path)
        out = self.process(self.prepare(image, pattern), stretch=stretch)
        written = write_image(output_path, out)
        logger.info(f"Processed {input_path} -> {written}")
        return written

    def infer_path(
        self, source: Path, destination: Path, stretch: bool = False, pattern: BayerPattern = BayerPattern.RGGB
    ) -> List[Path]:
        """Process one file, or every image of a directory into ``destination``"""
        source, destination = Path(source), Path(destination)
        if source.is_dir():
            inputs = sorted(p for p in source.iterdir() if p.suffix.lower() in IMAGE_SUFFIXES)
            if not inputs:
                logger.warning(f"No images found in {source}")
            return [self.infer_file(p, destination / f"{p.stem}.png", stretch, pattern) for p in inputs]
        if not source.exists():
            raise ImageIOError(f"Input does not exist: {source}")
        target = destination / f"{source.stem}.png" if destination.suffix == "" else destination
        return [self.infer_file(source, target, stretch, pattern)]
