"""Selective state space scan and the Mamba / Bi-Mamba blocks built on it."""

from dataclasses import dataclass
from typing import Tuple

import numpy as np
from loguru import logger

from app.exceptions import ConfigurationError, DimensionError, NumericError
from app.ssm.kernels import ZOH_LIMIT
from app.tensor import (
    ParamStore,
    Tensor,
    as_tensor,
    depthwise_conv1d,
    exp,
    linear,
    matmul,
    reverse_time,
    silu,
    slice_axis,
    softplus,
)


@dataclass(frozen=True)
class SSMParams:
    """Input-dependent SSM over ``d_inner`` channels with ``d_state`` states each."""

    a_log: Tensor       # [Di, N], A = -exp(a_log)
    dt_weight: Tensor   # [Di, Di]
    dt_bias: Tensor     # [Di]
    b_proj: Tensor      # [Di, N]
    c_proj: Tensor      # [Di, N]
    d_skip: Tensor      # [Di]

    @property
    def d_inner(self) -> int:
        return self.a_log.shape[0]

    @property
    def d_state(self) -> int:
        return self.a_log.shape[1]

    @classmethod
    def from_store(cls, store: ParamStore, prefix: str) -> "SSMParams":
        return cls(
            a_log=store[f"{prefix}.a_log"],
            dt_weight=store[f"{prefix}.dt_proj.weight"],
            dt_bias=store[f"{prefix}.dt_proj.bias"],
            b_proj=store[f"{prefix}.b_proj.weight"],
            c_proj=store[f"{prefix}.c_proj.weight"],
            d_skip=store[f"{prefix}.d_skip"],
        )


@dataclass(frozen=True)
class MambaBlockParams:
    in_weight: Tensor    # [D, 2 Di]
    in_bias: Tensor
    conv_kernel: Tensor  # [K, Di]
    conv_bias: Tensor
    ssm: SSMParams
    out_weight: Tensor   # [Di, D]
    out_bias: Tensor

    @property
    def d_model(self) -> int:
        return self.in_weight.shape[0]

    @classmethod
    def from_store(cls, store: ParamStore, prefix: str) -> "MambaBlockParams":
        return cls(
            in_weight=store[f"{prefix}.in_proj.weight"],
            in_bias=store[f"{prefix}.in_proj.bias"],
            conv_kernel=store[f"{prefix}.conv.kernel"],
            conv_bias=store[f"{prefix}.conv.bias"],
            ssm=SSMParams.from_store(store, f"{prefix}.ssm"),
            out_weight=store[f"{prefix}.out_proj.weight"],
            out_bias=store[f"{prefix}.out_proj.bias"],
        )


@dataclass(frozen=True)
class BiMambaParams:
    forward: MambaBlockParams
    backward: MambaBlockParams

    @classmethod
    def from_store(cls, store: ParamStore, prefix: str) -> "BiMambaParams":
        return cls(
            forward=MambaBlockParams.from_store(store, f"{prefix}.fwd"),
            backward=MambaBlockParams.from_store(store, f"{prefix}.bwd"),
        )


def _uniform(rng: np.random.Generator, shape: Tuple[int, ...], fan_in: int) -> np.ndarray:
    bound = 1.0 / np.sqrt(fan_in)
    return rng.uniform(-bound, bound, size=shape)


def init_ssm_params(
    store: ParamStore,
    prefix: str,
    d_inner: int,
    d_state: int,
    rng: np.random.Generator,
    dt_min: float = 1e-3,
    dt_max: float = 1e-1,
) -> SSMParams:
    """Declare SSM parameters with the usual S4D-real and log-uniform step initialization."""
    if not 0 < dt_min <= dt_max:
        raise ConfigurationError(f"need 0 < dt_min <= dt_max, got {dt_min}, {dt_max}")
    a_log = np.log(np.tile(np.arange(1, d_state + 1, dtype=np.float64), (d_inner, 1)))
    dt = np.exp(rng.uniform(np.log(dt_min), np.log(dt_max), size=d_inner))
    # softplus^-1
    dt_bias = dt + np.log(-np.expm1(-dt))

    store.declare(f"{prefix}.a_log", a_log)
    store.declare(f"{prefix}.dt_proj.weight", _uniform(rng, (d_inner, d_inner), d_inner))
    store.declare(f"{prefix}.dt_proj.bias", dt_bias)
    store.declare(f"{prefix}.b_proj.weight", rng.normal(0.0, d_inner ** -0.5, size=(d_inner, d_state)))
    store.declare(f"{prefix}.c_proj.weight", rng.normal(0.0, d_inner ** -0.5, size=(d_inner, d_state)))
    store.declare(f"{prefix}.d_skip", np.ones(d_inner))
    return SSMParams.from_store(store, prefix)


def init_mamba_params(
    store: ParamStore,
    prefix: str,
    d_model: int,
    d_inner: int,
    d_state: int,
    conv_width: int,
    rng: np.random.Generator,
    dt_min: float = 1e-3,
    dt_max: float = 1e-1,
    zero_out: bool = False,
) -> MambaBlockParams:
    """Declare one Mamba block. ``zero_out`` zeroes the output projection."""
    if min(d_model, d_inner, d_state, conv_width) < 1:
        raise ConfigurationError(
            f"Mamba sizes must be positive: d_model={d_model}, d_inner={d_inner}, "
            f"d_state={d_state}, conv_width={conv_width}"
        )
    store.declare(f"{prefix}.in_proj.weight", _uniform(rng, (d_model, 2 * d_inner), d_model))
    store.declare(f"{prefix}.in_proj.bias", np.zeros(2 * d_inner))
    store.declare(f"{prefix}.conv.kernel", _uniform(rng, (conv_width, d_inner), conv_width))
    store.declare(f"{prefix}.conv.bias", np.zeros(d_inner))
    init_ssm_params(store, f"{prefix}.ssm", d_inner, d_state, rng, dt_min, dt_max)
    out = np.zeros((d_inner, d_model)) if zero_out else _uniform(rng, (d_inner, d_model), d_inner)
    store.declare(f"{prefix}.out_proj.weight", out)
    store.declare(f"{prefix}.out_proj.bias", np.zeros(d_model))
    return MambaBlockParams.from_store(store, prefix)


def init_bi_mamba_params(
    store: ParamStore,
    prefix: str,
    d_model: int,
    d_inner: int,
    d_state: int,
    conv_width: int,
    rng: np.random.Generator,
    dt_min: float = 1e-3,
    dt_max: float = 1e-1,
    zero_out: bool = False,
) -> BiMambaParams:
    """Declare independent forward and backward Mamba blocks under ``prefix.fwd`` / ``prefix.bwd``."""
    for direction in ("fwd", "bwd"):
        init_mamba_params(
            store, f"{prefix}.{direction}", d_model, d_inner, d_state, conv_width,
            rng, dt_min=dt_min, dt_max=dt_max, zero_out=zero_out,
        )
    return BiMambaParams.from_store(store, prefix)


def tie_bi_mamba(store: ParamStore, prefix: str) -> BiMambaParams:
    """Copy the forward branch's values into the backward branch."""
    fwd_prefix, bwd_prefix = f"{prefix}.fwd.", f"{prefix}.bwd."
    for name, tensor in store.items():
        if name.startswith(fwd_prefix):
            store[bwd_prefix + name[len(fwd_prefix):]].data[...] = tensor.data
    return BiMambaParams.from_store(store, prefix)


def selective_scan_kernel(
    x: Tensor,
    delta: Tensor,
    a: Tensor,
    b: Tensor,
    c: Tensor,
    d_skip: Tensor,
) -> Tensor:
    """Fused selective scan with per-step parameters.

    For every channel ``d`` and state ``n``::

        h_t = exp(delta_t A) h_{t-1} + ((exp(delta_t A) - 1) / A) B_t x_t
        y_t = sum_n C_t h_t + D x_t

    Args:
        x: ``[..., L, Di]`` inputs.
        delta: ``[..., L, Di]`` positive step sizes.
        a: ``[Di, N]`` state diagonal.
        b: ``[..., L, N]`` input projections.
        c: ``[..., L, N]`` output projections.
        d_skip: ``[Di]`` skip weights.

    Raises:
        DimensionError: On inconsistent shapes.
        NumericError: If a hidden state becomes non-finite.
    """
    if delta.shape != x.shape:
        raise DimensionError(f"delta shape {delta.shape} differs from input {x.shape}")
    d_inner, d_state = a.shape
    if x.shape[-1] != d_inner or d_skip.shape != (d_inner,):
        raise DimensionError(f"input has {x.shape[-1]} channels, SSM expects {d_inner}")
    expected = x.shape[:-1] + (d_state,)
    if b.shape != expected or c.shape != expected:
        raise DimensionError(f"B/C shapes {b.shape}, {c.shape} differ from {expected}")

    length = x.shape[-2]
    xd, dd, ad, bd, cd = x.data, delta.data, a.data, b.data, c.data

    scaled = dd[..., None] * ad                      # [..., L, Di, N]
    a_bar = np.exp(scaled)
    small = np.abs(ad) < ZOH_LIMIT
    safe_a = np.where(small, 1.0, ad)
    gain = np.where(small, dd[..., None], np.expm1(scaled) / safe_a)
    b_bar = gain * bd[..., None, :]
    drive = b_bar * xd[..., None]

    states = np.empty_like(a_bar)
    h = np.zeros(a_bar.shape[:-3] + (d_inner, d_state), dtype=a_bar.dtype)
    for t in range(length):
        h = a_bar[..., t, :, :] * h + drive[..., t, :, :]
        states[..., t, :, :] = h
    if not np.all(np.isfinite(states)):
        raise NumericError("selective scan produced a non-finite hidden state")

    y = np.einsum("...ldn,...ln->...ld", states, cd) + d_skip.data * xd

    def backward(g):
        g_skip = (g * xd).reshape(-1, d_inner).sum(axis=0)
        gx = g * d_skip.data
        gc = np.einsum("...ld,...ldn->...ln", g, states)

        direct = g[..., None] * cd[..., None, :]
        g_states = np.empty_like(states)
        carry = np.zeros_like(h)
        for t in reversed(range(length)):
            step = direct[..., t, :, :] + carry
            g_states[..., t, :, :] = step
            carry = a_bar[..., t, :, :] * step

        previous = np.zeros_like(states)
        if length > 1:
            previous[..., 1:, :, :] = states[..., :-1, :, :]
        g_abar = g_states * previous
        g_bbar = g_states * xd[..., None]
        gx = gx + (g_states * b_bar).sum(axis=-1)

        g_gain = g_bbar * bd[..., None, :]
        gb = (g_bbar * gain).sum(axis=-2)

        dgain_ddelta = np.where(small, 1.0, a_bar)
        dgain_da = np.where(
            small,
            0.5 * dd[..., None] ** 2,
            (dd[..., None] * a_bar - gain) / safe_a,
        )
        g_scaled = g_abar * a_bar
        g_delta = (g_scaled * ad + g_gain * dgain_ddelta).sum(axis=-1)
        g_a = (g_scaled * dd[..., None] + g_gain * dgain_da).reshape(-1, d_inner, d_state).sum(axis=0)
        return gx, g_delta, g_a, gb, gc, g_skip

    return Tensor.from_op(y, (x, delta, a, b, c, d_skip), backward, "selective_scan")


def selective_scan(params: SSMParams, x: Tensor) -> Tensor:
    """Input-dependent SSM: ``delta``, ``B`` and ``C`` are projections of ``x``."""
    if x.shape[-1] != params.d_inner:
        raise DimensionError(f"SSM expects {params.d_inner} channels, got {x.shape[-1]}")
    delta = softplus(linear(x, params.dt_weight, params.dt_bias))
    b = matmul(x, params.b_proj)
    c = matmul(x, params.c_proj)
    a = -exp(params.a_log)
    return selective_scan_kernel(x, delta, a, b, c, params.d_skip)


def mamba_block(params: MambaBlockParams, x: Tensor) -> Tensor:
    """Gated Mamba block mapping ``[..., L, D]`` to ``[..., L, D]``.

    Raises:
        ConfigurationError: If the last axis of ``x`` is not ``D``.
    """
    if x.ndim < 2 or x.shape[-1] != params.d_model:
        raise ConfigurationError(f"Mamba block expects [..., L, {params.d_model}], got {x.shape}")
    d_inner = params.ssm.d_inner
    projected = linear(x, params.in_weight, params.in_bias)
    value = slice_axis(projected, 0, d_inner)
    gate = slice_axis(projected, d_inner, 2 * d_inner)

    value = silu(depthwise_conv1d(value, params.conv_kernel, params.conv_bias, causal=True))
    y = selective_scan(params.ssm, value) * silu(gate)
    return linear(y, params.out_weight, params.out_bias)


def bi_mamba(params: BiMambaParams, x: Tensor) -> Tensor:
    """Sum of a forward scan and a time-reversed backward scan."""
    x = as_tensor(x)
    forward = mamba_block(params.forward, x)
    backward = reverse_time(mamba_block(params.backward, reverse_time(x)))
    logger.trace(f"bi_mamba over {x.shape}")
    return forward + backward
