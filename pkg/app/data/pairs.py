"""Paired training examples and datasets."""

import logging
from dataclasses import dataclass, field, replace
from typing import Iterator, List, Literal, Tuple, Union

import numpy as np

from ..core.errors import ShapeError
from ..imaging.bayer import BayerPattern, RawImage, bilinear_demosaic

logger = logging.getLogger(__name__)

Split = Literal["all", "train", "val", "test"]


@dataclass(frozen=True)
class PairMeta:
    """Acquisition metadata of one pair"""

    pattern: BayerPattern = BayerPattern.RGGB
    exposure: float = 1.0
    sigma_8bit: float = 0.0
    source: str = "synth"
    name: str = ""

    def __post_init__(self):
        if not 0.0 < self.exposure <= 1.0:
            raise ValueError(f"exposure must be in (0, 1], got {self.exposure}")
        if self.sigma_8bit < 0.0:
            raise ValueError(f"sigma_8bit must be non-negative, got {self.sigma_8bit}")
        object.__setattr__(self, "pattern", BayerPattern(self.pattern))


@dataclass(frozen=True, eq=False)
class ImagePair:
    """Aligned degraded input (raw mosaic or demosaiced RGB) and RGB target"""

    input: Union[RawImage, np.ndarray]
    target: np.ndarray
    meta: PairMeta = field(default_factory=PairMeta)

    def __post_init__(self):
        target = np.asarray(self.target, dtype=np.float64)
        if target.ndim != 3 or target.shape[2] != 3:
            raise ShapeError(f"Pair target must be H×W×3, got shape {target.shape}")
        if isinstance(self.input, RawImage):
            input_shape = self.input.shape
        else:
            rgb = np.asarray(self.input, dtype=np.float64)
            if rgb.ndim != 3 or rgb.shape[2] != 3:
                raise ShapeError(f"Pair input must be a RawImage or H×W×3, got shape {rgb.shape}")
            object.__setattr__(self, "input", rgb)
            input_shape = rgb.shape[:2]
        if input_shape != target.shape[:2]:
            raise ShapeError(f"Pair input {input_shape} and target {target.shape[:2]} are not aligned")
        object.__setattr__(self, "target", target)

    @property
    def is_raw(self) -> bool:
        return isinstance(self.input, RawImage)

    @property
    def shape(self) -> Tuple[int, int]:
        return self.target.shape[:2]

    @property
    def name(self) -> str:
        return self.meta.name

    def demosaiced(self) -> np.ndarray:
        """Network input: bilinear demosaic of the raw, or the stored RGB"""
        return bilinear_demosaic(self.input) if self.is_raw else self.input

    def with_meta(self, **changes) -> "ImagePair":
        return replace(self, meta=replace(self.meta, **changes))


@dataclass
class Dataset:
    """Ordered pairs with a split tag"""

    pairs: List[ImagePair] = field(default_factory=list)
    split: Split = "all"

    def __len__(self) -> int:
        return len(self.pairs)

    def __iter__(self) -> Iterator[ImagePair]:
        return iter(self.pairs)

    def __getitem__(self, index: int) -> ImagePair:
        return self.pairs[index]

    @property
    def names(self) -> List[str]:
        return [pair.name for pair in self.pairs]


def split_dataset(
    dataset: Dataset, val_fraction: float = 0.1, test_fraction: float = 0.1, seed: int = 0
) -> Tuple[Dataset, Dataset, Dataset]:
    """Deterministic train/val/test split keeping every scene in one split.

    Pairs sharing a name belong to the same scene. Each split keeps the
    original dataset order.
    """
    if val_fraction < 0 or test_fraction < 0 or val_fraction + test_fraction >= 1.0:
        raise ValueError(f"Invalid split fractions val={val_fraction}, test={test_fraction}")
    scenes = list(dict.fromkeys(pair.name or f"#{i}" for i, pair in enumerate(dataset.pairs)))
    order = np.random.default_rng(seed).permutation(len(scenes))
    n_val = int(round(len(scenes) * val_fraction))
    n_test = int(round(len(scenes) * test_fraction))
    if scenes and n_val + n_test >= len(scenes):
        n_test = max(0, min(n_test, len(scenes) - 1 - n_val))
        n_val = max(0, min(n_val, len(scenes) - 1 - n_test))
    val_scenes = {scenes[i] for i in order[:n_val]}
    test_scenes = {scenes[i] for i in order[n_val : n_val + n_test]}

    buckets = {"train": [], "val": [], "test": []}
    for i, pair in enumerate(dataset.pairs):
        scene = pair.name or f"#{i}"
        key = "val" if scene in val_scenes else "test" if scene in test_scenes else "train"
        buckets[key].append(pair)
    logger.info(
        f"Split {len(dataset)} pairs into {len(buckets['train'])} train, "
        f"{len(buckets['val'])} val, {len(buckets['test'])} test"
    )
    return Dataset(buckets["train"], "train"), Dataset(buckets["val"], "val"), Dataset(buckets["test"], "test")
