import json
import logging
from pathlib import Path

from ..core.config import settings
from ..core.schemas import TrainConfig
from ..data.loaders import write_flat_dataset
from ..data.scenes import synthesize_dataset

logger = logging.getLogger(__name__)

MANIFEST_NAME = "manifest.json"


class SynthService:
    """Service writing a synthetic paired dataset in the flat layout"""

    def __init__(self, config: TrainConfig, progress: bool = True):
        self.config = config
        self.progress = progress

    def run(self) -> Path:
        """Generate ``synth_count`` pairs into the output directory

        Returns:
            Path: The written manifest
        """
        config = self.config
        output_dir = settings.resolve_output(config.output_dir)
        dataset = synthesize_dataset(
            config.synth_count,
            seed=config.seed,
            height=config.synth_height,
            width=config.synth_width,
            task=config.task,
            sigma_range=config.sigma_range(),
            exposure=config.exposure,
            pattern=config.pattern,
            progress=self.progress,
        )
        write_flat_dataset(dataset, output_dir)
        manifest = {
            "count": len(dataset),
            "fingerprint": config.fingerprint(),
            "pairs": [
                {"index": f"{i:03d}", "scene": pair.name, "sigma": pair.meta.sigma_8bit}
                for i, pair in enumerate(dataset)
            ],
            "config": config.experiment_dict(),
        }
        path = output_dir / MANIFEST_NAME
        path.write_text(json.dumps(manifest, indent=2, sort_keys=True) + "\n", encoding="utf-8")
        logger.info(f"Wrote synthetic dataset of {len(dataset)} pairs to {output_dir}")
        return path
