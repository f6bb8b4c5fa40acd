"""Synthetic scenes and the degradation model used to build training pairs.

Degraded inputs follow the simulation protocol: the clean linear scene is
scaled by the exposure factor, mosaiced, and corrupted by additive Gaussian
noise whose standard deviation is given in 8-bit units.
"""

import logging
from typing import Literal, Tuple

import numpy as np
from tqdm import tqdm

from ..core.errors import ShapeError
from ..imaging.bayer import BayerPattern, RawImage, mosaic
from ..imaging.color import srgb_encode
from .pairs import Dataset, ImagePair, PairMeta

logger = logging.getLogger(__name__)

MIN_SCENE_EXTENT = 32
STRIPE_LOW = 0.02
STRIPE_HIGH = 0.98

SynthTask = Literal["denoise_demosaic", "full_isp", "mimic_isp"]


def derive_seed(*parts: int) -> int:
    """Stable 32-bit seed from a tuple of integers"""
    return int(np.random.SeedSequence([int(p) for p in parts]).generate_state(1)[0])


def _smooth_background(rng: np.random.Generator, height: int, width: int) -> np.ndarray:
    y, x = np.mgrid[0:height, 0:width]
    y = y / (height - 1)
    x = x / (width - 1)
    background = np.empty((height, width, 3))
    for channel in range(3):
        low, high = np.sort(rng.uniform(0.05, 0.95, size=2))
        angle = rng.uniform(0.0, 2.0 * np.pi)
        ramp = np.cos(angle) * x + np.sin(angle) * y
        ramp = (ramp - ramp.min()) / max(ramp.max() - ramp.min(), 1e-12)
        background[..., channel] = low + (high - low) * ramp
    return background


def _paint_shapes(rng: np.random.Generator, image: np.ndarray) -> None:
    height, width = image.shape[:2]
    y, x = np.mgrid[0:height, 0:width]
    for _ in range(int(rng.integers(2, 6))):
        cy, cx = rng.uniform(0, height), rng.uniform(0, width)
        ry, rx = rng.uniform(0.05, 0.3) * height, rng.uniform(0.05, 0.3) * width
        mask = ((y - cy) / ry) ** 2 + ((x - cx) / rx) ** 2 <= 1.0
        image[mask] = rng.uniform(0.0, 1.0, size=3)
    for _ in range(int(rng.integers(2, 6))):
        top, left = int(rng.integers(0, height - 4)), int(rng.integers(0, width - 4))
        bottom = min(height, top + int(rng.integers(4, max(5, height // 3))))
        right = min(width, left + int(rng.integers(4, max(5, width // 3))))
        image[top:bottom, left:right] = rng.uniform(0.0, 1.0, size=3)


def _texture(rng: np.random.Generator, height: int, width: int) -> np.ndarray:
    """Band-limited sum of a few oriented sinusoids, amplitude about 0.05"""
    y, x = np.mgrid[0:height, 0:width]
    texture = np.zeros((height, width))
    for _ in range(3):
        frequency = rng.uniform(0.05, 0.25)
        angle = rng.uniform(0.0, np.pi)
        phase = rng.uniform(0.0, 2.0 * np.pi)
        texture += np.sin(2.0 * np.pi * frequency * (np.cos(angle) * x + np.sin(angle) * y) + phase)
    return 0.05 * texture / 3.0


def synth_scene(seed: int, height: int = 64, width: int = 64) -> np.ndarray:
    """Deterministic clean linear RGB scene in [0,1].

    Smooth gradients, flat ellipses and rectangles, a mild texture and a band
    of high-frequency neutral stripes spanning [0.02, 0.98].
    """
    if height % 2 or width % 2 or min(height, width) < MIN_SCENE_EXTENT:
        raise ShapeError(f"synth_scene needs even extents >= {MIN_SCENE_EXTENT}, got {height}×{width}")
    rng = np.random.default_rng(seed)
    image = _smooth_background(rng, height, width)
    _paint_shapes(rng, image)
    image += _texture(rng, height, width)[..., None]

    band = max(4, height // 8)
    top = int(rng.integers(0, height - band + 1))
    period = int(rng.choice([2, 4]))
    stripes = np.where((np.arange(width) % period) < period // 2, STRIPE_LOW, STRIPE_HIGH)
    image[top : top + band] = stripes[None, :, None]
    return np.clip(image, 0.0, 1.0)


def render_reference(clean: np.ndarray) -> np.ndarray:
    """Reference camera rendering of a clean linear scene (sRGB encoding)"""
    return srgb_encode(clean)


def degrade(
    clean: np.ndarray,
    exposure: float = 1.0,
    sigma_8bit: float = 0.0,
    pattern: BayerPattern = BayerPattern.RGGB,
    seed: int = 0,
    name: str = "",
    source: str = "synth",
) -> ImagePair:
    """Simulate a raw capture of ``clean``; the target is ``clean`` itself"""
    if not 0.0 < exposure <= 1.0:
        raise ValueError(f"exposure must be in (0, 1], got {exposure}")
    if not 0.0 <= sigma_8bit <= 10.0:
        raise ValueError(f"sigma_8bit must be in [0, 10], got {sigma_8bit}")
    clean = np.asarray(clean, dtype=np.float64)
    sampled = mosaic(clean * exposure, pattern).values
    if sigma_8bit > 0:
        noise = np.random.default_rng(seed).normal(0.0, sigma_8bit / 255.0, size=sampled.shape)
        sampled = sampled + noise
    meta = PairMeta(pattern=pattern, exposure=exposure, sigma_8bit=sigma_8bit, source=source, name=name)
    return ImagePair(RawImage(sampled, pattern), clean, meta)


def synthesize_dataset(
    count: int,
    seed: int = 0,
    height: int = 64,
    width: int = 64,
    task: SynthTask = "denoise_demosaic",
    sigma_range: Tuple[float, float] = (1.0, 10.0),
    exposure: float = 1.0,
    pattern: BayerPattern = BayerPattern.RGGB,
    progress: bool = False,
) -> Dataset:
    """Generate ``count`` degraded pairs.

    For ``mimic_isp`` the target is the reference rendering of the clean scene;
    otherwise it is the clean scene.
    """
    pairs = []
    for index in tqdm(range(count), desc="Synthesizing", disable=not progress):
        rng = np.random.default_rng(derive_seed(seed, index, 1))
        sigma = float(rng.uniform(*sigma_range)) if sigma_range[1] > sigma_range[0] else float(sigma_range[0])
        clean = synth_scene(derive_seed(seed, index, 0), height, width)
        pair = degrade(clean, exposure, sigma, pattern, seed=derive_seed(seed, index, 2), name=f"scene_{index:04d}")
        if task == "mimic_isp":
            pair = ImagePair(pair.input, render_reference(clean), pair.meta)
        pairs.append(pair)
    logger.info(f"Synthesized {count} {task} pairs of {height}×{width} (seed {seed})")
    return Dataset(pairs)
