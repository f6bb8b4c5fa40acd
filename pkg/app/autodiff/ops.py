"""Primitive differentiable operations.

Every op accepts ``Tensor`` operands (plain numbers/arrays are lifted to
constants), computes its forward value with numpy and registers a
vector-Jacobian product through ``apply_op``. Only same-shape operands, or a
0-d scalar against anything, are combined elementwise; there is no general
broadcasting.
"""

import logging
from typing import Literal, Sequence, Tuple, Union

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view

from ..core.errors import ShapeError
from .tensor import ArrayLike, Tensor, apply_op, branch

logger = logging.getLogger(__name__)

Operand = Union[Tensor, ArrayLike]
Padding = Literal["reflect", "none"]
ActivationKind = Literal["relu", "tanh"]
PoolKind = Literal["max2x2", "mean2x2", "global_mean"]


def lift(x: Operand) -> Tensor:
    return x if isinstance(x, Tensor) else Tensor(x)


def _pair(a: Operand, b: Operand, op: str) -> Tuple[Tensor, Tensor]:
    a, b = lift(a), lift(b)
    if a.shape != b.shape and a.shape != () and b.shape != ():
        raise ShapeError(f"{op}: operand shapes {a.shape} and {b.shape} differ")
    return a, b


def _reduce_to(grad: np.ndarray, shape: Tuple[int, ...]) -> np.ndarray:
    if grad.shape == shape:
        return grad
    return np.asarray(grad.sum())


# ---------------------------------------------------------------------------
# Elementwise arithmetic
# ---------------------------------------------------------------------------


def add(a: Operand, b: Operand) -> Tensor:
    a, b = _pair(a, b, "add")
    return apply_op(
        "add", a.data + b.data, (a, b), lambda g: (_reduce_to(g, a.shape), _reduce_to(g, b.shape))
    )


def sub(a: Operand, b: Operand) -> Tensor:
    a, b = _pair(a, b, "sub")
    return apply_op(
        "sub", a.data - b.data, (a, b), lambda g: (_reduce_to(g, a.shape), _reduce_to(-g, b.shape))
    )


def mul(a: Operand, b: Operand) -> Tensor:
    a, b = _pair(a, b, "mul")
    return apply_op(
        "mul",
        a.data * b.data,
        (a, b),
        lambda g: (_reduce_to(g * b.data, a.shape), _reduce_to(g * a.data, b.shape)),
    )


def div(a: Operand, b: Operand) -> Tensor:
    a, b = _pair(a, b, "div")
    value = a.data / b.data
    return apply_op(
        "div",
        value,
        (a, b),
        lambda g: (_reduce_to(g / b.data, a.shape), _reduce_to(-g * value / b.data, b.shape)),
    )


def neg(x: Operand) -> Tensor:
    x = lift(x)
    return apply_op("neg", -x.data, (x,), lambda g: (-g,))


def square(x: Operand) -> Tensor:
    x = lift(x)
    return apply_op("square", x.data * x.data, (x,), lambda g: (2.0 * x.data * g,))


def abs_(x: Operand) -> Tensor:
    x = lift(x)
    sign = branch((x,), np.sign(x.data))
    return apply_op("abs", sign * x.data, (x,), lambda g: (g * sign,))


def clamp(x: Operand, low: float = 0.0, high: float = 1.0) -> Tensor:
    """Clip to [low, high]; zero gradient where clipped"""
    x = lift(x)
    side = branch((x,), np.where(x.data < low, -1, np.where(x.data > high, 1, 0)).astype(np.int8))
    inside = side == 0
    value = np.where(inside, x.data, np.where(side < 0, low, high))
    return apply_op("clamp", value, (x,), lambda g: (np.where(inside, g, 0.0),))


# ---------------------------------------------------------------------------
# Reductions and shape plumbing
# ---------------------------------------------------------------------------


def sum_(x: Operand) -> Tensor:
    x = lift(x)
    return apply_op("sum", np.sum(x.data), (x,), lambda g: (np.full(x.shape, float(g)),))


def mean(x: Operand) -> Tensor:
    x = lift(x)
    n = x.size
    return apply_op("mean", np.sum(x.data) / n, (x,), lambda g: (np.full(x.shape, float(g) / n),))


def reshape(x: Operand, shape: Tuple[int, ...]) -> Tensor:
    x = lift(x)
    if int(np.prod(shape)) != x.size:
        raise ShapeError(f"reshape: cannot view {x.shape} as {shape}")
    return apply_op("reshape", x.data.reshape(shape), (x,), lambda g: (g.reshape(x.shape),))


def slice_channels(x: Operand, start: int, stop: int) -> Tensor:
    """Channels [start, stop) of an H×W×C tensor"""
    x = lift(x)
    if x.ndim != 3 or not 0 <= start < stop <= x.shape[2]:
        raise ShapeError(f"slice_channels: [{start}, {stop}) invalid for shape {x.shape}")

    def vjp(g):
        full = np.zeros(x.shape)
        full[..., start:stop] = g
        return (full,)

    return apply_op("slice_channels", x.data[..., start:stop], (x,), vjp)


def concat_channels(tensors: Sequence[Operand]) -> Tensor:
    """Stack H×W×Ci tensors along the channel axis"""
    tensors = [lift(t) for t in tensors]
    if any(t.ndim != 3 or t.shape[:2] != tensors[0].shape[:2] for t in tensors):
        raise ShapeError(f"concat_channels: incompatible shapes {[t.shape for t in tensors]}")
    bounds = np.cumsum([0] + [t.shape[2] for t in tensors])

    def vjp(g):
        return tuple(g[..., bounds[i] : bounds[i + 1]] for i in range(len(tensors)))

    return apply_op("concat_channels", np.concatenate([t.data for t in tensors], axis=-1), tensors, vjp)


# ---------------------------------------------------------------------------
# Network layers
# ---------------------------------------------------------------------------


def _fold_reflect(padded_grad: np.ndarray, pad: int) -> np.ndarray:
    """Adjoint of numpy's reflect padding on the two spatial axes"""
    rows = padded_grad[pad:-pad].copy()
    for r in range(pad):
        rows[pad - r] += padded_grad[r]
        rows[-1 - (pad - r)] += padded_grad[-1 - r]
    out = rows[:, pad:-pad].copy()
    for c in range(pad):
        out[:, pad - c] += rows[:, c]
        out[:, -1 - (pad - c)] += rows[:, -1 - c]
    return out


def conv2d(
    x: Operand,
    kernel: Operand,
    bias: Operand,
    stride: int = 1,
    padding: Padding = "reflect",
) -> Tensor:
    """Cross-correlate an H×W×Cin map with a k×k×Cin×Cout kernel.

    Reflect padding mirrors interior pixels without repeating the border and,
    at stride 1, keeps the spatial extent.
    """
    x, kernel, bias = lift(x), lift(kernel), lift(bias)
    if x.ndim != 3:
        raise ShapeError(f"conv2d: input must be H×W×C, got shape {x.shape}")
    if kernel.ndim != 4 or kernel.shape[0] != kernel.shape[1] or kernel.shape[0] % 2 == 0:
        raise ShapeError(f"conv2d: kernel must be k×k×Cin×Cout with odd k, got {kernel.shape}")
    k, _, cin, cout = kernel.shape
    if x.shape[2] != cin:
        raise ShapeError(f"conv2d: input has {x.shape[2]} channels but kernel expects Cin={cin}")
    if bias.shape != (cout,):
        raise ShapeError(f"conv2d: bias must have shape ({cout},), got {bias.shape}")
    if stride < 1:
        raise ShapeError(f"conv2d: stride must be positive, got {stride}")

    height, width = x.shape[:2]
    if padding == "reflect":
        pad = k // 2
        if min(height, width) <= pad:
            raise ShapeError(f"conv2d: reflect padding of {pad} needs extents > {pad}, got {x.shape}")
        padded = np.pad(x.data, ((pad, pad), (pad, pad), (0, 0)), mode="reflect") if pad else x.data
    elif padding == "none":
        pad = 0
        if min(height, width) < k:
            raise ShapeError(f"conv2d: unpadded {k}×{k} kernel needs extents >= {k}, got {x.shape}")
        padded = x.data
    else:
        raise ValueError(f"conv2d: unknown padding '{padding}'")

    windows = sliding_window_view(padded, (k, k), axis=(0, 1))[::stride, ::stride]
    out_h, out_w = windows.shape[:2]
    cols = windows.transpose(0, 1, 3, 4, 2).reshape(out_h * out_w, k * k * cin)
    kmat = kernel.data.reshape(k * k * cin, cout)
    value = (cols @ kmat).reshape(out_h, out_w, cout) + bias.data

    def vjp(g):
        g2 = g.reshape(out_h * out_w, cout)
        grad_kernel = (cols.T @ g2).reshape(kernel.shape)
        grad_bias = g2.sum(axis=0)
        grad_cols = (g2 @ kmat.T).reshape(out_h, out_w, k, k, cin)
        grad_padded = np.zeros(padded.shape)
        for i in range(k):
            for j in range(k):
                grad_padded[
                    i : i + stride * (out_h - 1) + 1 : stride,
                    j : j + stride * (out_w - 1) + 1 : stride,
                ] += grad_cols[:, :, i, j]
        grad_x = _fold_reflect(grad_padded, pad) if pad else grad_padded
        return grad_x, grad_kernel, grad_bias

    return apply_op("conv2d", value, (x, kernel, bias), vjp)


def box_filter(x: Operand, window: int) -> Tensor:
    """Uniform window×window mean per channel, reflect borders"""
    x = lift(x)
    if x.ndim != 3:
        raise ShapeError(f"box_filter: input must be H×W×C, got shape {x.shape}")
    channels = x.shape[2]
    kernel = np.zeros((window, window, channels, channels))
    for c in range(channels):
        kernel[:, :, c, c] = 1.0 / (window * window)
    return conv2d(x, kernel, np.zeros(channels), stride=1, padding="reflect")


def activation(x: Operand, kind: ActivationKind) -> Tensor:
    """Elementwise relu or tanh"""
    x = lift(x)
    if kind == "relu":
        mask = branch((x,), x.data > 0)
        return apply_op("relu", np.where(mask, x.data, 0.0), (x,), lambda g: (np.where(mask, g, 0.0),))
    if kind == "tanh":
        y = np.tanh(x.data)
        return apply_op("tanh", y, (x,), lambda g: (g * (1.0 - y * y),))
    raise ValueError(f"activation: unknown kind '{kind}'")


def relu(x: Operand) -> Tensor:
    return activation(x, "relu")


def tanh(x: Operand) -> Tensor:
    return activation(x, "tanh")


def _even_crop(x: Tensor, kind: str) -> Tuple[int, int]:
    if x.ndim != 3:
        raise ShapeError(f"pool {kind}: input must be H×W×C, got shape {x.shape}")
    half_h, half_w = x.shape[0] // 2, x.shape[1] // 2
    if half_h == 0 or half_w == 0:
        raise ShapeError(f"pool {kind}: needs extents >= 2, got {x.shape}")
    return half_h, half_w


def pool(x: Operand, kind: PoolKind) -> Tensor:
    """2×2 max / mean pooling (trailing odd row/column cropped) or global mean.

    Max-pool gradients go to the first maximum of each window in row-major
    order.
    """
    x = lift(x)
    if kind == "global_mean":
        if x.ndim != 3:
            raise ShapeError(f"pool global_mean: input must be H×W×C, got shape {x.shape}")
        count = x.shape[0] * x.shape[1]
        return apply_op(
            "global_mean",
            x.data.sum(axis=(0, 1)) / count,
            (x,),
            lambda g: (np.broadcast_to(g / count, x.shape).copy(),),
        )

    half_h, half_w = _even_crop(x, kind)
    channels = x.shape[2]
    cropped = x.data[: 2 * half_h, : 2 * half_w]

    def uncrop(grad_cropped):
        full = np.zeros(x.shape)
        full[: 2 * half_h, : 2 * half_w] = grad_cropped
        return full

    if kind == "max2x2":
        windows = (
            cropped.reshape(half_h, 2, half_w, 2, channels)
            .transpose(0, 2, 4, 1, 3)
            .reshape(half_h, half_w, channels, 4)
        )
        winner = branch((x,), np.argmax(windows, axis=-1))
        value = np.take_along_axis(windows, winner[..., None], axis=-1)[..., 0]

        def vjp(g):
            grad_windows = np.zeros(windows.shape)
            np.put_along_axis(grad_windows, winner[..., None], g[..., None], axis=-1)
            grad_cropped = (
                grad_windows.reshape(half_h, half_w, channels, 2, 2)
                .transpose(0, 3, 1, 4, 2)
                .reshape(2 * half_h, 2 * half_w, channels)
            )
            return (uncrop(grad_cropped),)

        return apply_op("max2x2", value, (x,), vjp)

    if kind == "mean2x2":
        value = cropped.reshape(half_h, 2, half_w, 2, channels).mean(axis=(1, 3))

        def vjp(g):
            return (uncrop(np.repeat(np.repeat(g, 2, axis=0), 2, axis=1) / 4.0),)

        return apply_op("mean2x2", value, (x,), vjp)

    raise ValueError(f"pool: unknown kind '{kind}'")


def affine(x: Operand, weights: Operand, bias: Operand) -> Tensor:
    """weights · x + bias for a length-n vector and an m×n matrix"""
    x, weights, bias = lift(x), lift(weights), lift(bias)
    if x.ndim != 1 or weights.ndim != 2 or weights.shape[1] != x.shape[0]:
        raise ShapeError(f"affine: weights {weights.shape} do not accept input {x.shape}")
    if bias.shape != (weights.shape[0],):
        raise ShapeError(f"affine: bias must have shape ({weights.shape[0]},), got {bias.shape}")
    return apply_op(
        "affine",
        weights.data @ x.data + bias.data,
        (x, weights, bias),
        lambda g: (weights.data.T @ g, np.outer(g, x.data), g),
    )


def channel_mix(x: Operand, weights: Operand) -> Tensor:
    """Per-pixel matrix product: H×W×n with an m×n matrix gives H×W×m"""
    x, weights = lift(x), lift(weights)
    if x.ndim != 3 or weights.ndim != 2 or weights.shape[1] != x.shape[2]:
        raise ShapeError(f"channel_mix: weights {weights.shape} do not accept input {x.shape}")
    m, n = weights.shape

    def vjp(g):
        grad_weights = g.reshape(-1, m).T @ x.data.reshape(-1, n)
        return g @ weights.data, grad_weights

    return apply_op("channel_mix", x.data @ weights.data.T, (x, weights), vjp)
