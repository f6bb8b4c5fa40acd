"""The two-stage network.

The low-level stage is a chain of 3×3 convolution blocks. Each block emits
``width`` channels: ``width - 3`` relu features and 3 tanh residuals that are
added to a running image estimate. The next block sees the features
concatenated with the current estimate.

The high-level stage reduces the last features with strided convolutions and
max-pooling, averages them globally and maps the result to the 3×10 quadratic
colour transform, which is then applied to the low-level estimate.
"""

import logging
from collections import OrderedDict
from dataclasses import dataclass
from typing import Dict, Iterator, Mapping, Optional, Tuple

import numpy as np

from ..autodiff import ops
from ..autodiff.tensor import Graph, Tensor
from ..core.errors import ShapeError
from ..core.schemas import ModelConfig
from .color_transform import MONOMIAL_COUNT, apply_quadratic_transform

logger = logging.getLogger(__name__)

HEAD_OUTPUTS = 3 * MONOMIAL_COUNT
KERNEL_SIZE = 3


def parameter_shapes(config: ModelConfig) -> "OrderedDict[str, Tuple[int, ...]]":
    """Parameter names and shapes in declaration (checkpoint) order"""
    shapes: "OrderedDict[str, Tuple[int, ...]]" = OrderedDict()
    k = KERNEL_SIZE
    for block in range(config.n_ll):
        cin = 3 if block == 0 else config.width
        shapes[f"ll.{block}.kernel"] = (k, k, cin, config.width)
        shapes[f"ll.{block}.bias"] = (config.width,)
    if config.highlevel:
        hl_width = config.highlevel_width
        for stage in range(config.n_hl):
            cin = config.features if stage == 0 else hl_width
            shapes[f"hl.{stage}.kernel"] = (k, k, cin, hl_width)
            shapes[f"hl.{stage}.bias"] = (hl_width,)
        head_in = hl_width if config.n_hl else config.features
        shapes["head.weight"] = (HEAD_OUTPUTS, head_in)
        shapes["head.bias"] = (HEAD_OUTPUTS,)
    return shapes


@dataclass(frozen=True)
class BoundParams:
    """Parameters as tensors, either graph leaves (training) or constants"""

    config: ModelConfig
    tensors: Mapping[str, Tensor]

    def __getitem__(self, name: str) -> Tensor:
        return self.tensors[name]


@dataclass(eq=False)
class ModelParams:
    """All learnable arrays of both stages plus the architecture"""

    config: ModelConfig
    arrays: Dict[str, np.ndarray]

    def __post_init__(self):
        expected = parameter_shapes(self.config)
        if list(self.arrays) != list(expected):
            missing = sorted(set(expected) - set(self.arrays))
            extra = sorted(set(self.arrays) - set(expected))
            if missing or extra:
                raise ShapeError(f"ModelParams names do not match the config (missing {missing}, unexpected {extra})")
        ordered = OrderedDict()
        for name, shape in expected.items():
            value = np.asarray(self.arrays[name], dtype=np.float64)
            if value.shape != shape:
                raise ShapeError(f"Parameter '{name}' has shape {value.shape}, expected {shape}")
            ordered[name] = value
        self.arrays = ordered

    @classmethod
    def zeros(cls, config: ModelConfig) -> "ModelParams":
        return cls(config, OrderedDict((name, np.zeros(shape)) for name, shape in parameter_shapes(config).items()))

    def __iter__(self) -> Iterator[str]:
        return iter(self.arrays)

    def __getitem__(self, name: str) -> np.ndarray:
        return self.arrays[name]

    @property
    def parameter_count(self) -> int:
        return int(sum(value.size for value in self.arrays.values()))

    def with_arrays(self, arrays: Mapping[str, np.ndarray]) -> "ModelParams":
        return ModelParams(self.config, OrderedDict((name, arrays[name]) for name in self.arrays))

    def copy(self) -> "ModelParams":
        return self.with_arrays({name: value.copy() for name, value in self.arrays.items()})

    def bind(self, graph: Optional[Graph] = None) -> BoundParams:
        """Expose the arrays as tensors; with a graph they become named leaves"""
        if graph is None:
            tensors = {name: Tensor(value) for name, value in self.arrays.items()}
        else:
            tensors = {name: graph.leaf(value, name) for name, value in self.arrays.items()}
        return BoundParams(self.config, tensors)


def lowlevel_forward(rgb, bound: BoundParams, ablate_skip: bool = False) -> Tuple[Tensor, Tensor]:
    """Run the residual blocks.

    Args:
        rgb: H×W×3 demosaiced input in [0,1]
        bound (BoundParams): Bound model parameters
        ablate_skip (bool): Residual channels replace the estimate instead of
            adding to it

    Returns:
        Tuple[Tensor, Tensor]: The final H×W×3 estimate and the final
        H×W×(width-3) feature map
    """
    rgb = ops.lift(rgb)
    config = bound.config
    if rgb.ndim != 3 or rgb.shape[2] != 3:
        raise ShapeError(f"lowlevel_forward expects an H×W×3 image, got shape {rgb.shape}")
    if min(rgb.shape[:2]) < KERNEL_SIZE:
        raise ShapeError(f"lowlevel_forward needs H, W >= {KERNEL_SIZE}, got {rgb.shape[:2]}")

    estimate = rgb
    block_input = rgb
    features = None
    for block in range(config.n_ll):
        out = ops.conv2d(block_input, bound[f"ll.{block}.kernel"], bound[f"ll.{block}.bias"])
        features = ops.relu(ops.slice_channels(out, 0, config.features))
        residual = ops.tanh(ops.slice_channels(out, config.features, config.width))
        estimate = residual if ablate_skip else estimate + residual
        block_input = ops.concat_channels([features, estimate])
    return estimate, features


def highlevel_forward(features, bound: BoundParams) -> Tensor:
    """Map a feature map to the 3×10 colour transform as a differentiable tensor"""
    features = ops.lift(features)
    config = bound.config
    if not config.highlevel:
        raise ShapeError("highlevel_forward called on a model without a high-level stage")
    minimum = 4**config.n_hl
    if features.ndim != 3 or min(features.shape[:2]) < minimum:
        raise ShapeError(
            f"Image too small for {config.n_hl} high-level stages: need H, W >= {minimum}, got {features.shape[:2]}"
        )

    x = features
    for stage in range(config.n_hl):
        x = ops.conv2d(x, bound[f"hl.{stage}.kernel"], bound[f"hl.{stage}.bias"], stride=2, padding="reflect")
        x = ops.pool(ops.relu(x), "max2x2")
    pooled = ops.pool(x, "global_mean")
    head = ops.affine(pooled, bound["head.weight"], bound["head.bias"])
    return ops.reshape(head, (3, MONOMIAL_COUNT))


def shared_input(estimate: Tensor, features: Tensor, config: ModelConfig, ablate_shared: bool) -> Tensor:
    """High-level input: the features, or the estimate zero-padded to the same width"""
    if not ablate_shared:
        return features
    if config.features < 3:
        raise ShapeError(f"Feature width {config.features} cannot hold the 3-channel estimate")
    if config.features == 3:
        return estimate
    padding = np.zeros(estimate.shape[:2] + (config.features - 3,))
    return ops.concat_channels([estimate, padding])


def deepisp_forward(
    raw_rgb,
    bound: BoundParams,
    ablate_shared: bool = False,
    ablate_skip: bool = False,
    clamp_output: bool = False,
) -> Tensor:
    """Full pipeline on a bilinear-demosaiced input.

    Models without a high-level stage return the low-level estimate. The output
    is clamped to [0,1] only when ``clamp_output`` is set (inference).
    """
    config = bound.config
    estimate, features = lowlevel_forward(raw_rgb, bound, ablate_skip=ablate_skip)
    if not config.highlevel:
        return ops.clamp(estimate, 0.0, 1.0) if clamp_output else estimate
    transform = highlevel_forward(shared_input(estimate, features, config, ablate_shared), bound)
    return apply_quadratic_transform(estimate, transform, clamp=clamp_output)
