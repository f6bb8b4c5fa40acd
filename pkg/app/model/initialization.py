"""Parameter initialization and the affine colour-transform warm start."""

import logging
import math
from collections import OrderedDict
from typing import Iterable, NamedTuple, Optional, Tuple, Union

import numpy as np

from ..core.errors import ShapeError
from ..core.schemas import ModelConfig
from ..data.pairs import ImagePair
from .color_transform import ColorTransform
from .network import ModelParams, parameter_shapes

logger = logging.getLogger(__name__)

PairLike = Union[ImagePair, Tuple[np.ndarray, np.ndarray]]


class AffineInit(NamedTuple):
    affine: np.ndarray
    transform: ColorTransform
    rank_deficient: bool


def _as_arrays(pair: PairLike) -> Tuple[np.ndarray, np.ndarray]:
    if isinstance(pair, ImagePair):
        return pair.demosaiced(), pair.target
    source, target = pair
    return np.asarray(source, dtype=np.float64), np.asarray(target, dtype=np.float64)


def fit_affine(source: np.ndarray, target: np.ndarray) -> Tuple[np.ndarray, bool]:
    """Least-squares 3×4 map from (r, g, b, 1) of ``source`` to ``target``.

    Returns:
        Tuple[np.ndarray, bool]: The map and whether the design matrix was rank
        deficient (the least-norm solution is returned in that case)
    """
    if source.shape != target.shape or source.ndim != 3 or source.shape[2] != 3:
        raise ShapeError(f"fit_affine: source {source.shape} and target {target.shape} must be equal H×W×3")
    pixels = source.reshape(-1, 3)
    if pixels.shape[0] < 4:
        raise ShapeError(f"fit_affine needs at least 4 pixels, got {pixels.shape[0]}")
    design = np.hstack([pixels, np.ones((pixels.shape[0], 1))])
    solution, _, rank, _ = np.linalg.lstsq(design, target.reshape(-1, 3), rcond=None)
    return solution.T, rank < 4


def init_w_affine(pairs: Iterable[PairLike]) -> AffineInit:
    """Average of the per-pair affine regressions, embedded as a colour transform"""
    fits = [fit_affine(*_as_arrays(pair)) for pair in pairs]
    if not fits:
        raise ValueError("init_w_affine needs at least one pair")
    rank_deficient = any(flag for _, flag in fits)
    if rank_deficient:
        logger.warning(
            f"{sum(flag for _, flag in fits)} of {len(fits)} pairs gave a rank-deficient regression; "
            "least-norm solutions were used"
        )
    affine = np.mean([fit for fit, _ in fits], axis=0)
    logger.info(f"Affine colour initialization fitted on {len(fits)} pairs")
    return AffineInit(affine, ColorTransform.from_affine(affine), rank_deficient)


def init_params(seed: int, config: ModelConfig, w_init: Optional[ColorTransform] = None) -> ModelParams:
    """He-normal kernels, zero biases, and a head emitting ``w_init`` (identity by default)"""
    rng = np.random.default_rng(seed)
    transform = w_init if w_init is not None else ColorTransform.identity()
    arrays = OrderedDict()
    for name, shape in parameter_shapes(config).items():
        if name.endswith(".kernel"):
            fan_in = shape[0] * shape[1] * shape[2]
            arrays[name] = rng.normal(0.0, math.sqrt(2.0 / fan_in), size=shape)
        elif name == "head.bias":
            arrays[name] = transform.flatten()
        else:
            arrays[name] = np.zeros(shape)
    params = ModelParams(config, arrays)
    logger.debug(f"Initialized {params.parameter_count} parameters with seed {seed}")
    return params


def identity_params(config: ModelConfig, w_init: Optional[ColorTransform] = None) -> ModelParams:
    """All weights zero with the head emitting ``w_init``: the network is the identity"""
    params = ModelParams.zeros(config)
    if config.highlevel:
        transform = w_init if w_init is not None else ColorTransform.identity()
        params.arrays["head.bias"] = transform.flatten()
    return params
