"""Bias-corrected Adam, as a pure function over named parameter arrays."""

import logging
from dataclasses import dataclass, field
from typing import Dict, Mapping, Tuple

import numpy as np

from ..core.errors import NonFiniteGradientError, ShapeError
from ..core.schemas import AdamConfig

logger = logging.getLogger(__name__)

Arrays = Dict[str, np.ndarray]


@dataclass(eq=False)
class AdamState:
    """First/second moment accumulators per parameter and the step counter"""

    m: Arrays = field(default_factory=dict)
    v: Arrays = field(default_factory=dict)
    t: int = 0

    @classmethod
    def zeros_like(cls, params: Mapping[str, np.ndarray]) -> "AdamState":
        return cls(
            m={name: np.zeros_like(value) for name, value in params.items()},
            v={name: np.zeros_like(value) for name, value in params.items()},
            t=0,
        )


def adam_step(
    params: Mapping[str, np.ndarray],
    grads: Mapping[str, np.ndarray],
    state: AdamState,
    lr: float = 5e-5,
    beta1: float = 0.9,
    beta2: float = 0.999,
    eps: float = 1e-8,
) -> Tuple[Arrays, AdamState]:
    """Apply one Adam update without mutating the inputs.

    Args:
        params (Mapping[str, np.ndarray]): Current parameter values
        grads (Mapping[str, np.ndarray]): Gradients, same names and shapes
        state (AdamState): Moments and step count; zero moments are created
            for parameters seen for the first time

    Returns:
        Tuple[Arrays, AdamState]: Updated parameters and state
    """
    for name, value in params.items():
        if name not in grads:
            raise ShapeError(f"adam_step: no gradient for parameter '{name}'")
        if grads[name].shape != value.shape:
            raise ShapeError(
                f"adam_step: gradient for '{name}' has shape {grads[name].shape}, parameter {value.shape}"
            )
        if not np.all(np.isfinite(grads[name])):
            logger.error(f"Rejecting Adam step: non-finite gradient for '{name}'")
            raise NonFiniteGradientError(name)

    t = state.t + 1
    bias1 = 1.0 - beta1**t
    bias2 = 1.0 - beta2**t
    new_params: Arrays = {}
    new_m: Arrays = {}
    new_v: Arrays = {}
    for name, value in params.items():
        g = grads[name]
        m_prev = state.m.get(name, np.zeros_like(value))
        v_prev = state.v.get(name, np.zeros_like(value))
        if m_prev.shape != value.shape or v_prev.shape != value.shape:
            raise ShapeError(f"adam_step: moment shapes for '{name}' do not match {value.shape}")
        m = beta1 * m_prev + (1.0 - beta1) * g
        v = beta2 * v_prev + (1.0 - beta2) * (g * g)
        m_hat = m / bias1
        v_hat = v / bias2
        new_params[name] = value - lr * m_hat / (np.sqrt(v_hat) + eps)
        new_m[name] = m
        new_v[name] = v
    return new_params, AdamState(new_m, new_v, t)


def adam_step_with(config: AdamConfig, params, grads, state: AdamState) -> Tuple[Arrays, AdamState]:
    return adam_step(params, grads, state, config.lr, config.beta1, config.beta2, config.eps)
