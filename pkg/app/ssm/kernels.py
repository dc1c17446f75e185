"""Linear time-invariant state space kernels.

These are the reference forms of the diagonal SSM: zero-order-hold
discretization, the step-by-step recurrence and the equivalent global
convolution kernel. The selective scan in ``app.ssm.mamba`` must agree with
them whenever its parameters are held constant.
"""

from typing import Tuple, Union

import numpy as np

from app.exceptions import ContractError, DimensionError
from app.tensor import Tensor

ZOH_LIMIT = 1e-8

ArrayLike = Union[np.ndarray, float, Tensor]


def _array(value: ArrayLike) -> np.ndarray:
    if isinstance(value, Tensor):
        return value.data
    return np.asarray(value, dtype=np.result_type(np.asarray(value), np.float32))


def discretize_zoh(a: ArrayLike, b: ArrayLike, delta: ArrayLike) -> Tuple[np.ndarray, np.ndarray]:
    """Zero-order-hold discretization of a diagonal system.

    ``a_bar = exp(delta * a)`` and ``b_bar = (exp(delta * a) - 1) / a * b``,
    with the ``a -> 0`` limit ``b_bar = delta * b`` wherever ``|a| < 1e-8``.

    Args:
        a: Diagonal of the state matrix.
        b: Input projection, same shape as ``a``.
        delta: Step size, scalar or broadcastable to ``a``.

    Returns:
        ``(a_bar, b_bar)``.

    Raises:
        ContractError: If any step size is negative. A zero step is the
            zero-length hold and yields ``(1, 0)``.
    """
    a = _array(a)
    b = _array(b)
    delta = _array(delta)
    if np.any(delta < 0):
        raise ContractError(f"ZOH step size must be non-negative, got min {delta.min()}")

    scaled = delta * a
    a_bar = np.exp(scaled)
    small = np.abs(a) < ZOH_LIMIT
    safe_a = np.where(small, 1.0, a)
    gain = np.where(small, delta * np.ones_like(scaled), np.expm1(scaled) / safe_a)
    return a_bar, gain * b


def recurrent_scan(
    a_bar: ArrayLike,
    b_bar: ArrayLike,
    c: ArrayLike,
    x: ArrayLike,
    d_skip: float = 0.0,
) -> Tensor:
    """Run ``h_t = a_bar * h_{t-1} + b_bar * x_t``, ``y_t = sum_n c[n] h_t[n]`` from ``h_0 = 0``.

    Parameters are either constant (``[N]``) or given per step (``[L, N]``).

    Raises:
        DimensionError: Per-step parameters whose length differs from ``x``.
    """
    x = _array(x).reshape(-1)
    length = x.shape[0]
    a_bar, b_bar, c = (np.atleast_1d(_array(p)) for p in (a_bar, b_bar, c))

    def at(p: np.ndarray, t: int) -> np.ndarray:
        return p[t] if p.ndim == 2 else p

    for p in (a_bar, b_bar, c):
        if p.ndim == 2 and p.shape[0] != length:
            raise DimensionError(f"per-step parameters cover {p.shape[0]} steps, input has {length}")
    states = {p.shape[-1] for p in (a_bar, b_bar, c)}
    if len(states) != 1:
        raise DimensionError(f"state sizes disagree: {sorted(states)}")

    h = np.zeros(states.pop(), dtype=np.result_type(a_bar, b_bar, x))
    y = np.empty(length, dtype=h.dtype)
    for t in range(length):
        h = at(a_bar, t) * h + at(b_bar, t) * x[t]
        y[t] = np.dot(at(c, t), h) + d_skip * x[t]
    return Tensor(y, dtype=y.dtype)


def lti_kernel(a_bar: ArrayLike, b_bar: ArrayLike, c: ArrayLike, length: int) -> Tensor:
    """Global convolution kernel ``k[j] = sum_n c[n] a_bar[n]^j b_bar[n]``.

    Raises:
        ContractError: If any parameter varies per step.
    """
    a_bar, b_bar, c = (np.atleast_1d(_array(p)) for p in (a_bar, b_bar, c))
    if any(p.ndim != 1 for p in (a_bar, b_bar, c)):
        raise ContractError("lti_kernel needs time-invariant parameters; got per-step values")
    powers = a_bar[None, :] ** np.arange(length)[:, None]
    kernel = (powers * (c * b_bar)[None, :]).sum(axis=1)
    return Tensor(kernel, dtype=kernel.dtype)


def causal_convolve(x: ArrayLike, kernel: ArrayLike) -> Tensor:
    """``y[t] = sum_{j <= t} kernel[j] * x[t - j]``."""
    x = _array(x).reshape(-1)
    kernel = _array(kernel).reshape(-1)
    y = np.convolve(x, kernel)[: x.shape[0]]
    return Tensor(y, dtype=y.dtype)
