"""Differentiable operators used by the HCMEN layers.

Each operator takes and returns ``Tensor`` objects and records an analytic
backward closure. Leading dimensions are treated as batch dimensions.
"""

from typing import Optional, Sequence

import numpy as np

from app.exceptions import ConfigurationError, DimensionError
from app.tensor.core import Tensor, as_tensor, unbroadcast

EXP_CLAMP = 30.0
ACTIVATIONS = ("exp", "softplus", "silu", "tanh", "sigmoid")


def matmul(a: Tensor, b: Tensor) -> Tensor:
    """Matrix product over the last two axes of ``a`` and ``b``.

    ``b`` is either a plain matrix shared by every leading index of ``a`` or
    carries the same leading dimensions.

    Raises:
        DimensionError: If the inner dimensions disagree.
    """
    b = as_tensor(b, like=a)
    if a.ndim < 2 or b.ndim < 2:
        raise DimensionError(f"matmul needs at least 2-d operands, got {a.shape} and {b.shape}")
    if a.shape[-1] != b.shape[-2]:
        raise DimensionError(f"matmul inner dimensions differ: {a.shape} @ {b.shape}")

    def backward(g):
        ga = unbroadcast(g @ np.swapaxes(b.data, -1, -2), a.shape)
        if b.ndim == 2:
            gb = a.data.reshape(-1, a.shape[-1]).T @ g.reshape(-1, g.shape[-1])
        else:
            gb = unbroadcast(np.swapaxes(a.data, -1, -2) @ g, b.shape)
        return ga, gb

    return Tensor.from_op(a.data @ b.data, (a, b), backward, "matmul")


def linear(x: Tensor, weight: Tensor, bias: Optional[Tensor] = None) -> Tensor:
    """Token-wise affine map ``x @ weight + bias``."""
    out = matmul(x, weight)
    return out + bias if bias is not None else out


def _pad_time(x: np.ndarray, left: int, right: int) -> np.ndarray:
    widths = [(0, 0)] * x.ndim
    widths[-2] = (left, right)
    return np.pad(x, widths)


def _padding(width: int, causal: bool):
    if causal:
        return width - 1, 0
    if width % 2 == 0:
        raise ConfigurationError(f"'same' convolution needs an odd kernel width, got {width}")
    half = (width - 1) // 2
    return half, half


def depthwise_conv1d(x: Tensor, kernel: Tensor, bias: Tensor, causal: bool = False) -> Tensor:
    """Per-channel convolution over time with zero padding.

    ``out[t, d] = bias[d] + sum_j kernel[j, d] * x_pad[t + j, d]``. The default
    pads symmetrically so the length is preserved; ``causal`` pads on the left
    only, so every output depends on current and past steps.

    Args:
        x: ``[..., L, D]`` input.
        kernel: ``[K, D]`` taps.
        bias: ``[D]`` offsets.
        causal: Left padding instead of "same" padding.

    Raises:
        ConfigurationError: Even ``K`` with "same" padding.
        DimensionError: Channel counts disagree.
    """
    width, channels = kernel.shape
    if x.shape[-1] != channels or bias.shape != (channels,):
        raise DimensionError(
            f"depthwise_conv1d channels differ: x {x.shape}, kernel {kernel.shape}, bias {bias.shape}"
        )
    left, right = _padding(width, causal)
    length = x.shape[-2]
    xpad = _pad_time(x.data, left, right)
    out = np.broadcast_to(bias.data, x.shape).astype(np.result_type(x.data, kernel.data))
    for j in range(width):
        out += kernel.data[j] * xpad[..., j:j + length, :]

    def backward(g):
        gpad = np.zeros_like(xpad)
        gk = np.empty_like(kernel.data)
        for j in range(width):
            gpad[..., j:j + length, :] += g * kernel.data[j]
            gk[j] = (g * xpad[..., j:j + length, :]).reshape(-1, channels).sum(axis=0)
        gx = gpad[..., left:left + length, :]
        gb = g.reshape(-1, channels).sum(axis=0)
        return gx, gk, gb

    return Tensor.from_op(out, (x, kernel, bias), backward, "depthwise_conv1d")


def conv1d(x: Tensor, weight: Tensor, bias: Tensor) -> Tensor:
    """Full-channel "same" convolution over time.

    Args:
        x: ``[..., L, D_in]`` input.
        weight: ``[K, D_in, D_out]`` with odd ``K``.
        bias: ``[D_out]``.
    """
    width, d_in, d_out = weight.shape
    if x.shape[-1] != d_in:
        raise ConfigurationError(f"conv1d expects {d_in} input channels, got {x.shape[-1]}")
    left, right = _padding(width, causal=False)
    length = x.shape[-2]
    xpad = _pad_time(x.data, left, right)
    out = np.broadcast_to(bias.data, x.shape[:-1] + (d_out,)).astype(np.result_type(x.data, weight.data))
    for j in range(width):
        out += xpad[..., j:j + length, :] @ weight.data[j]

    def backward(g):
        gpad = np.zeros_like(xpad)
        gw = np.empty_like(weight.data)
        g2 = g.reshape(-1, d_out)
        for j in range(width):
            gpad[..., j:j + length, :] += g @ weight.data[j].T
            gw[j] = xpad[..., j:j + length, :].reshape(-1, d_in).T @ g2
        return gpad[..., left:left + length, :], gw, g2.sum(axis=0)

    return Tensor.from_op(out, (x, weight, bias), backward, "conv1d")


def layer_norm(x: Tensor, gamma: Tensor, beta: Tensor, eps: float = 1e-5) -> Tensor:
    """Normalize the last axis to zero mean and unit variance, then scale and shift.

    Raises:
        DimensionError: If the last axis is empty.
    """
    dim = x.shape[-1] if x.ndim else 0
    if dim == 0:
        raise DimensionError("layer_norm over an empty feature axis")
    mean = x.data.mean(axis=-1, keepdims=True)
    centered = x.data - mean
    var = (centered * centered).mean(axis=-1, keepdims=True)
    inv = 1.0 / np.sqrt(var + eps)
    xhat = centered * inv
    out = xhat * gamma.data + beta.data

    def backward(g):
        gxhat = g * gamma.data
        gx = inv / dim * (
            dim * gxhat
            - gxhat.sum(axis=-1, keepdims=True)
            - xhat * (gxhat * xhat).sum(axis=-1, keepdims=True)
        )
        ggamma = (g * xhat).reshape(-1, dim).sum(axis=0)
        gbeta = g.reshape(-1, dim).sum(axis=0)
        return gx, ggamma, gbeta

    return Tensor.from_op(out, (x, gamma, beta), backward, "layer_norm")


def _sigmoid(z: np.ndarray) -> np.ndarray:
    return 0.5 * (1.0 + np.tanh(0.5 * z))


def activation(x: Tensor, kind: str) -> Tensor:
    """Elementwise nonlinearity with its exact derivative.

    ``exp`` and ``softplus`` clamp their argument to [-30, 30]; the gradient is
    zero outside that range.
    """
    z = x.data
    if kind == "exp":
        inside = np.abs(z) <= EXP_CLAMP
        out = np.exp(np.clip(z, -EXP_CLAMP, EXP_CLAMP))
        local = out * inside
    elif kind == "softplus":
        inside = np.abs(z) <= EXP_CLAMP
        zc = np.clip(z, -EXP_CLAMP, EXP_CLAMP)
        out = np.logaddexp(0.0, zc).astype(z.dtype)
        local = _sigmoid(zc) * inside
    elif kind == "silu":
        s = _sigmoid(z)
        out = z * s
        local = s * (1.0 + z * (1.0 - s))
    elif kind == "tanh":
        out = np.tanh(z)
        local = 1.0 - out * out
    elif kind == "sigmoid":
        out = _sigmoid(z)
        local = out * (1.0 - out)
    else:
        raise ConfigurationError(f"unknown activation '{kind}', expected one of {ACTIVATIONS}")

    def backward(g):
        return (g * local,)

    return Tensor.from_op(out, (x,), backward, kind)


def exp(x: Tensor) -> Tensor:
    return activation(x, "exp")


def softplus(x: Tensor) -> Tensor:
    return activation(x, "softplus")


def silu(x: Tensor) -> Tensor:
    return activation(x, "silu")


def tanh(x: Tensor) -> Tensor:
    return activation(x, "tanh")


def sigmoid(x: Tensor) -> Tensor:
    return activation(x, "sigmoid")


def softmax(x: Tensor) -> Tensor:
    """Softmax over the last axis (max-subtracted)."""
    shifted = x.data - x.data.max(axis=-1, keepdims=True)
    e = np.exp(shifted)
    out = e / e.sum(axis=-1, keepdims=True)

    def backward(g):
        return (out * (g - (g * out).sum(axis=-1, keepdims=True)),)

    return Tensor.from_op(out, (x,), backward, "softmax")


def log_softmax(x: Tensor) -> Tensor:
    """Log of the softmax over the last axis."""
    shifted = x.data - x.data.max(axis=-1, keepdims=True)
    out = shifted - np.log(np.exp(shifted).sum(axis=-1, keepdims=True))

    def backward(g):
        return (g - np.exp(out) * g.sum(axis=-1, keepdims=True),)

    return Tensor.from_op(out, (x,), backward, "log_softmax")


def mean_axis(x: Tensor, axis: int) -> Tensor:
    """Arithmetic mean along ``axis``.

    Raises:
        DimensionError: If the axis is out of range or empty.
    """
    if not -x.ndim <= axis < x.ndim:
        raise DimensionError(f"axis {axis} out of range for shape {x.shape}")
    count = x.shape[axis]
    if count == 0:
        raise DimensionError(f"mean over empty axis {axis} of shape {x.shape}")

    def backward(g):
        return (np.broadcast_to(np.expand_dims(g, axis), x.shape) / count,)

    return Tensor.from_op(x.data.mean(axis=axis), (x,), backward, "mean")


def reverse_time(x: Tensor, axis: Optional[int] = None) -> Tensor:
    """Reverse the time axis (``-2`` for ``[..., L, D]``, ``0`` for vectors)."""
    if axis is None:
        axis = -2 if x.ndim >= 2 else 0

    def backward(g):
        return (np.flip(g, axis=axis),)

    return Tensor.from_op(np.flip(x.data, axis=axis).copy(), (x,), backward, "reverse_time")


def stack(tensors: Sequence[Tensor], axis: int) -> Tensor:
    """Stack equally shaped tensors along a new axis."""
    shapes = {t.shape for t in tensors}
    if len(shapes) != 1:
        raise DimensionError(f"stack needs equal shapes, got {sorted(shapes)}")
    out = np.stack([t.data for t in tensors], axis=axis)

    def backward(g):
        return tuple(np.take(g, i, axis=axis) for i in range(len(tensors)))

    return Tensor.from_op(out, tuple(tensors), backward, "stack")


def take(x: Tensor, index: int, axis: int) -> Tensor:
    """Select one position along ``axis``, dropping that axis."""
    def backward(g):
        full = np.zeros_like(x.data)
        np.moveaxis(full, axis, 0)[index] = g
        return (full,)

    return Tensor.from_op(np.take(x.data, index, axis=axis), (x,), backward, "take")


def slice_axis(x: Tensor, start: int, stop: int, axis: int = -1) -> Tensor:
    """Contiguous slice ``[start, stop)`` along ``axis``."""
    index = [slice(None)] * x.ndim
    index[axis] = slice(start, stop)
    index = tuple(index)

    def backward(g):
        full = np.zeros_like(x.data)
        full[index] = g
        return (full,)

    return Tensor.from_op(x.data[index].copy(), (x,), backward, "slice")


def where(condition: np.ndarray, a: Tensor, b: Tensor) -> Tensor:
    """Pick ``a`` where ``condition`` holds and ``b`` elsewhere, without blending."""
    condition = np.asarray(condition, dtype=bool)

    def backward(g):
        return (
            unbroadcast(np.where(condition, g, 0.0), a.shape),
            unbroadcast(np.where(condition, 0.0, g), b.shape),
        )

    out = np.where(condition, a.data, b.data)
    return Tensor.from_op(out, (a, b), backward, "where")


def l2_normalize(x: Tensor, axis: int = -1, eps: float = 1e-12) -> Tensor:
    """Scale vectors along ``axis`` to unit length; zero vectors stay zero."""
    norm = np.sqrt((x.data * x.data).sum(axis=axis, keepdims=True))
    denom = norm + eps
    out = x.data / denom

    def backward(g):
        dot = (g * x.data).sum(axis=axis, keepdims=True)
        safe = np.where(norm > 0, norm, 1.0)
        correction = np.where(norm > 0, dot / (denom * denom * safe), 0.0)
        return (g / denom - x.data * correction,)

    return Tensor.from_op(out, (x,), backward, "l2_normalize")
