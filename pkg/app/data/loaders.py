"""Readers and writers for paired-image directories.

Three layouts are understood:

``flat``
    ``NNN_input.png`` + ``NNN_target.png`` + ``NNN_meta.txt`` per pair. The
    sidecar holds one ``key=value`` per line (``pattern``, ``exposure``,
    ``sigma``). Single-channel inputs are raw mosaics, 3-channel inputs are
    already demosaiced.
``msr``
    ``input/<stem>.png`` (raw, optionally stored as a 3-channel CFA image) and
    ``groundtruth/<stem>.png``; ``train.txt``/``validation.txt``/``test.txt``
    optionally list the stems of each split.
``s7isp``
    One directory per scene holding ``short_exposure_raw.png``,
    ``medium_exposure_raw.png`` and ``medium_exposure.{png,jpg}``; the raw
    files are 16-bit single-channel conversions of the captured DNGs.
"""

import logging
from pathlib import Path
from typing import Dict, List, Literal, Optional, Union

import numpy as np

from ..core.errors import DatasetError
from ..imaging.bayer import BayerPattern, RawImage
from ..imaging.image_io import read_image, write_image
from .pairs import Dataset, ImagePair, PairMeta, Split

logger = logging.getLogger(__name__)

Layout = Literal["msr", "s7isp", "flat"]
Variant = Literal["low_light", "well_lit"]
PathLike = Union[str, Path]

_MSR_SPLIT_FILES = {"train": "train.txt", "val": "validation.txt", "test": "test.txt"}
_S7_VARIANTS = {
    "low_light": ("short_exposure_raw.png", 0.25),
    "well_lit": ("medium_exposure_raw.png", 1.0),
}
_S7_TARGETS = ("medium_exposure.png", "medium_exposure.jpg")
_SIDECAR_KEYS = {"pattern", "exposure", "sigma"}


def read_sidecar(path: Path) -> Dict[str, str]:
    """Parse a ``key=value`` metadata file"""
    values = {}
    for number, line in enumerate(path.read_text(encoding="utf-8").splitlines(), start=1):
        line = line.strip()
        if not line or line.startswith("#"):
            continue
        key, sep, value = line.partition("=")
        if not sep or key.strip() not in _SIDECAR_KEYS:
            raise DatasetError(f"Malformed metadata line {number} in {path}: '{line}'")
        values[key.strip()] = value.strip()
    return values


def write_sidecar(path: Path, meta: PairMeta) -> Path:
    path.write_text(
        f"pattern={meta.pattern.value}\nexposure={meta.exposure!r}\nsigma={meta.sigma_8bit!r}\n", encoding="utf-8"
    )
    return path


def _even(image: np.ndarray) -> np.ndarray:
    height, width = image.shape[:2]
    return image[: height - height % 2, : width - width % 2]


def _as_raw(image: np.ndarray, pattern: BayerPattern, path: Path) -> RawImage:
    """Single-channel raw, collapsing CFA images stored with one non-zero channel per site"""
    if image.ndim == 3:
        image = image.sum(axis=2)
    if image.ndim != 2:
        raise DatasetError(f"Cannot interpret {path} as a raw mosaic (shape {image.shape})")
    return RawImage(_even(image), pattern)


def _as_rgb(image: np.ndarray, path: Path) -> np.ndarray:
    if image.ndim == 2:
        image = np.repeat(image[..., None], 3, axis=2)
    if image.ndim != 3 or image.shape[2] != 3:
        raise DatasetError(f"Cannot interpret {path} as an RGB image (shape {image.shape})")
    return _even(image)


def _meta_from_sidecar(path: Path, default_pattern: BayerPattern, name: str) -> PairMeta:
    if not path.exists():
        logger.warning(f"No metadata sidecar {path.name}; assuming {default_pattern.value}, exposure 1, sigma 0")
        return PairMeta(pattern=default_pattern, source="flat", name=name)
    values = read_sidecar(path)
    try:
        return PairMeta(
            pattern=BayerPattern(values.get("pattern", default_pattern.value)),
            exposure=float(values.get("exposure", 1.0)),
            sigma_8bit=float(values.get("sigma", 0.0)),
            source="flat",
            name=name,
        )
    except ValueError as e:
        raise DatasetError(f"Invalid metadata in {path}: {str(e)}") from e


def _load_flat(root: Path, pattern: BayerPattern) -> List[ImagePair]:
    pairs = []
    for input_path in sorted(root.glob("*_input.png")):
        stem = input_path.name[: -len("_input.png")]
        target_path = root / f"{stem}_target.png"
        if not target_path.exists():
            logger.warning(f"Skipping {input_path.name}: missing counterpart {target_path.name}")
            continue
        meta = _meta_from_sidecar(root / f"{stem}_meta.txt", pattern, stem)
        image = read_image(input_path)
        target = _as_rgb(read_image(target_path), target_path)
        source = _as_raw(image, meta.pattern, input_path) if image.ndim == 2 else _as_rgb(image, input_path)
        pairs.append(ImagePair(source, target, meta))
    return pairs


def _msr_stems(root: Path, split: Optional[Split]) -> Optional[set]:
    if split in (None, "all"):
        return None
    list_path = root / _MSR_SPLIT_FILES[split]
    if not list_path.exists():
        logger.warning(f"No {list_path.name} in {root}; loading every pair for split '{split}'")
        return None
    return {Path(line.strip()).stem for line in list_path.read_text(encoding="utf-8").splitlines() if line.strip()}


def _load_msr(root: Path, pattern: BayerPattern, split: Optional[Split]) -> List[ImagePair]:
    input_dir, target_dir = root / "input", root / "groundtruth"
    if not input_dir.is_dir() or not target_dir.is_dir():
        raise DatasetError(f"MSR layout needs 'input' and 'groundtruth' directories under {root}")
    selected = _msr_stems(root, split)
    pairs = []
    for input_path in sorted(input_dir.glob("*.png")):
        if selected is not None and input_path.stem not in selected:
            continue
        target_path = target_dir / input_path.name
        if not target_path.exists():
            logger.warning(f"Skipping {input_path.name}: no ground truth in {target_dir}")
            continue
        raw = _as_raw(read_image(input_path), pattern, input_path)
        target = _as_rgb(read_image(target_path), target_path)[: raw.shape[0], : raw.shape[1]]
        pairs.append(ImagePair(raw, target, PairMeta(pattern=pattern, source="msr", name=input_path.stem)))
    return pairs


def _load_s7isp(root: Path, pattern: BayerPattern, variant: Variant) -> List[ImagePair]:
    if variant not in _S7_VARIANTS:
        raise DatasetError(f"Unknown S7-ISP variant '{variant}'")
    raw_name, exposure = _S7_VARIANTS[variant]
    pairs = []
    for scene in sorted(p for p in root.iterdir() if p.is_dir()):
        raw_path = scene / raw_name
        target_path = next((scene / t for t in _S7_TARGETS if (scene / t).exists()), None)
        if not raw_path.exists() or target_path is None:
            logger.warning(f"Skipping scene {scene.name}: needs {raw_name} and one of {_S7_TARGETS}")
            continue
        raw = _as_raw(read_image(raw_path), pattern, raw_path)
        target = _as_rgb(read_image(target_path), target_path)[: raw.shape[0], : raw.shape[1]]
        meta = PairMeta(pattern=pattern, exposure=exposure, source=f"s7isp-{variant}", name=scene.name)
        pairs.append(ImagePair(raw, target, meta))
    return pairs


def load_pair_dir(
    path: PathLike,
    layout: Layout = "flat",
    variant: Variant = "low_light",
    split: Optional[Split] = None,
    pattern: BayerPattern = BayerPattern.RGGB,
) -> Dataset:
    """Load every complete pair under ``path`` in lexicographic order.

    Args:
        path: Dataset root
        layout (Layout): Directory layout
        variant (Variant): S7-ISP input exposure
        split (Optional[Split]): MSR split to select through its stem list
        pattern (BayerPattern): Pattern of raw files without metadata

    Returns:
        Dataset: The pairs; empty (with a warning) when none are found
    """
    root = Path(path)
    if not root.is_dir():
        raise DatasetError(f"Dataset directory does not exist: {root}")
    pattern = BayerPattern(pattern)
    if layout == "flat":
        pairs = _load_flat(root, pattern)
    elif layout == "msr":
        pairs = _load_msr(root, pattern, split)
    elif layout == "s7isp":
        pairs = _load_s7isp(root, pattern, variant)
    else:
        raise DatasetError(f"Unknown dataset layout '{layout}'")

    if not pairs:
        logger.warning(f"No image pairs found in {root} ({layout} layout)")
    else:
        logger.info(f"Loaded {len(pairs)} pairs from {root} ({layout} layout)")
    return Dataset(pairs, split or "all")


def write_flat_dataset(dataset: Dataset, path: PathLike, bit_depth: int = 16) -> List[Path]:
    """Write pairs as ``NNN_input.png``/``NNN_target.png``/``NNN_meta.txt``"""
    root = Path(path)
    root.mkdir(parents=True, exist_ok=True)
    written = []
    for index, pair in enumerate(dataset):
        stem = f"{index:03d}"
        source = pair.input.values if pair.is_raw else pair.input
        written.append(write_image(root / f"{stem}_input.png", source, bit_depth))
        written.append(write_image(root / f"{stem}_target.png", pair.target, bit_depth))
        written.append(write_sidecar(root / f"{stem}_meta.txt", pair.meta))
    logger.info(f"Wrote {len(dataset)} pairs to {root}")
    return written
