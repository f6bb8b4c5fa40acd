"""Finite-difference checks of the primitive ops and losses."""

import logging
from typing import Callable, Dict, List, Mapping, Optional, Tuple

import numpy as np

from ..autodiff import ops
from ..autodiff.tensor import Graph, Tensor
from ..imaging.color import luminance, rgb_to_lab
from ..model.color_transform import apply_quadratic_transform, monomial_features
from ..training.losses import DEFAULT_LOSS, combined_loss, l2_loss, ms_ssim, ssim_map
from .base import BaseGradientCheck

logger = logging.getLogger(__name__)

OpUnderTest = Callable[[Mapping[str, Tensor]], Tensor]
Shapes = Dict[str, Tuple[int, ...]]

SSIM_STEP = 1e-4


class ProjectedOpCheck(BaseGradientCheck):
    """Checks an op through the scalar ``sum(op(leaves) * R)`` for a random R.

    Leaves are drawn uniformly from ``[low, high]``, which keeps points away
    from the non-smooth regions of the op. Each point checks ``max_coords``
    sampled coordinates per leaf.
    """

    max_coords = 4

    def __init__(
        self,
        name: str,
        shapes: Shapes,
        op: OpUnderTest,
        low: float = -1.0,
        high: float = 1.0,
        h: Optional[float] = None,
    ):
        self._name = name
        self.shapes = shapes
        self.op = op
        self.low = low
        self.high = high
        if h is not None:
            self.h = h

    @property
    def name(self) -> str:
        return self._name

    def build(self, rng: np.random.Generator):
        point = {name: rng.uniform(self.low, self.high, size=shape) for name, shape in self.shapes.items()}
        out_shape = self.op({name: Tensor(value) for name, value in point.items()}).shape
        projection = rng.normal(size=out_shape)

        def fn(graph: Graph, leaves: Mapping[str, Tensor]) -> Tensor:
            out = self.op(leaves)
            return out if out.shape == () else ops.sum_(out * projection)

        return fn, point


def _conv(leaves, stride=1, padding="reflect"):
    return ops.conv2d(leaves["x"], leaves["kernel"], leaves["bias"], stride=stride, padding=padding)


def op_checks() -> List[BaseGradientCheck]:
    """One check per differentiable primitive and loss"""
    conv_shapes = {"x": (7, 7, 2), "kernel": (3, 3, 2, 4), "bias": (4,)}
    image = {"x": (6, 6, 3)}
    pair = {"a": (12, 12, 1), "b": (12, 12, 1)}
    rgb_pair = {"pred": (12, 12, 3), "target": (12, 12, 3)}
    return [
        ProjectedOpCheck("conv2d", conv_shapes, _conv),
        ProjectedOpCheck("conv2d_stride2", conv_shapes, lambda t: _conv(t, stride=2)),
        ProjectedOpCheck("conv2d_valid", conv_shapes, lambda t: _conv(t, padding="none")),
        ProjectedOpCheck("relu", image, lambda t: ops.relu(t["x"])),
        ProjectedOpCheck("tanh", image, lambda t: ops.tanh(t["x"])),
        ProjectedOpCheck("max2x2", {"x": (7, 6, 3)}, lambda t: ops.pool(t["x"], "max2x2")),
        ProjectedOpCheck("mean2x2", {"x": (7, 6, 3)}, lambda t: ops.pool(t["x"], "mean2x2")),
        ProjectedOpCheck("global_mean", image, lambda t: ops.pool(t["x"], "global_mean")),
        ProjectedOpCheck(
            "affine",
            {"x": (6,), "weights": (4, 6), "bias": (4,)},
            lambda t: ops.affine(t["x"], t["weights"], t["bias"]),
        ),
        ProjectedOpCheck(
            "channel_mix", {"x": (4, 4, 5), "weights": (3, 5)}, lambda t: ops.channel_mix(t["x"], t["weights"])
        ),
        ProjectedOpCheck("monomials", {"x": (4, 4, 3)}, lambda t: monomial_features(t["x"]), 0.0, 1.0),
        ProjectedOpCheck(
            "quadratic_transform",
            {"x": (4, 4, 3), "w": (3, 10)},
            lambda t: apply_quadratic_transform(t["x"], t["w"]),
            0.0,
            1.0,
        ),
        ProjectedOpCheck("rgb_to_lab", image, lambda t: rgb_to_lab(t["x"]), 0.1, 0.9),
        ProjectedOpCheck("luminance", image, lambda t: luminance(t["x"]), 0.0, 100.0),
        ProjectedOpCheck("box_filter", image, lambda t: ops.box_filter(t["x"], 5)),
        # 5×5 window sums: at h=1e-5 rounding swamps the smallest gradients.
        ProjectedOpCheck("ssim_map", pair, lambda t: ssim_map(t["a"], t["b"], 5), 0.0, 1.0, h=SSIM_STEP),
        ProjectedOpCheck("ms_ssim", pair, lambda t: ms_ssim(t["a"], t["b"], DEFAULT_LOSS), 0.0, 1.0, h=SSIM_STEP),
        ProjectedOpCheck("combined_loss", rgb_pair, lambda t: combined_loss(t["pred"], t["target"]), 0.1, 0.9),
        ProjectedOpCheck("l2_loss", rgb_pair, lambda t: l2_loss(t["pred"], t["target"]), 0.0, 1.0),
    ]
