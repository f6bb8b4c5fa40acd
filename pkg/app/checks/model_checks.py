"""End-to-end gradient checks of loss(network(input)) with respect to every parameter."""

import logging
from typing import Literal

import numpy as np

from ..core.schemas import LossConfig, ModelConfig
from ..model.initialization import init_params
from ..model.network import BoundParams, deepisp_forward
from ..training.losses import combined_loss, l2_loss
from .base import BaseGradientCheck

logger = logging.getLogger(__name__)

TINY_ISP = ModelConfig(n_ll=2, n_hl=1, width=8, hl_width=4)
TINY_DENOISE = ModelConfig(n_ll=2, n_hl=0, width=8, highlevel=False)


class EndToEndCheck(BaseGradientCheck):
    """Loss of the full network on a random 16×16 input.

    Every point samples ``max_coords`` coordinates of every parameter; a
    complete sweep is ``run`` with ``max_coords = None``.
    """

    h = 1e-4
    max_coords = 2

    def __init__(
        self,
        name: str,
        config: ModelConfig,
        loss: Literal["combined", "l2"] = "combined",
        size: int = 16,
        ablate_shared: bool = False,
        ablate_skip: bool = False,
    ):
        self._name = name
        self.config = config
        self.loss = loss
        self.size = size
        self.ablate_shared = ablate_shared
        self.ablate_skip = ablate_skip
        self.loss_config = LossConfig()

    @property
    def name(self) -> str:
        return self._name

    def build(self, rng: np.random.Generator):
        params = init_params(int(rng.integers(0, 2**31)), self.config)
        point = {}
        for name, value in params.arrays.items():
            # Non-zero head weights and biases so every path carries gradient.
            point[name] = value if name.endswith(".kernel") else value + rng.normal(0.0, 0.05, size=value.shape)
        source = rng.uniform(0.2, 0.8, size=(self.size, self.size, 3))
        target = rng.uniform(0.2, 0.8, size=(self.size, self.size, 3))

        def fn(graph, leaves):
            out = deepisp_forward(
                source,
                BoundParams(self.config, leaves),
                ablate_shared=self.ablate_shared,
                ablate_skip=self.ablate_skip,
            )
            if self.loss == "l2":
                return l2_loss(out, target)
            return combined_loss(out, target, self.loss_config)

        return fn, point


def model_checks():
    return [
        EndToEndCheck("deepisp_end_to_end", TINY_ISP),
        EndToEndCheck("deepisp_no_shared", TINY_ISP, ablate_shared=True),
        EndToEndCheck("denoise_end_to_end", TINY_DENOISE, loss="l2"),
    ]
