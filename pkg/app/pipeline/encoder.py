"""Temporal resampling, projection and the hierarchical CNN -> Bi-Mamba encoder."""

from dataclasses import dataclass
from typing import TYPE_CHECKING, Optional, Tuple, Union

import numpy as np

from app.exceptions import ConfigurationError, DimensionError, EmptyInputError
from app.ssm import BiMambaParams, bi_mamba, init_bi_mamba_params
from app.tensor import ParamStore, Tensor, as_tensor, conv1d, depthwise_conv1d, layer_norm

if TYPE_CHECKING:
    from app.model.schemas import ModelConfig


def resample_time(x: Union[Tensor, np.ndarray], length: int) -> Tensor:
    """Linearly interpolate ``[T, D]`` onto ``length`` evenly spaced positions.

    The first and last rows are kept exactly; ``T == length`` is the identity.

    Raises:
        EmptyInputError: If ``T == 0``.
    """
    data = x.data if isinstance(x, Tensor) else np.asarray(x, dtype=np.float64)
    if data.ndim != 2:
        raise DimensionError(f"resample_time expects [T, D], got {data.shape}")
    steps = data.shape[0]
    if steps == 0:
        raise EmptyInputError("cannot resample an empty sequence")
    if length < 1:
        raise ConfigurationError(f"target length must be positive, got {length}")
    if steps == length:
        return Tensor(data.copy(), dtype=data.dtype)

    positions = np.linspace(0.0, steps - 1, length)
    lower = np.floor(positions).astype(np.int64)
    upper = np.minimum(lower + 1, steps - 1)
    weight = (positions - lower)[:, None]
    out = data[lower] * (1.0 - weight) + data[upper] * weight
    return Tensor(out, dtype=data.dtype)


def resample_batch(features: np.ndarray, lengths: np.ndarray, length: int) -> np.ndarray:
    """Resample each padded ``[T_max, D]`` sample over its true length."""
    return np.stack([
        resample_time(features[i, :int(n)], length).data for i, n in enumerate(lengths)
    ])


@dataclass(frozen=True)
class HybridBlockParams:
    """Local depthwise-conv stage then global Bi-Mamba stage, each pre-normed and residual.

    A stage whose parameters are ``None`` is skipped.
    """
    local_gamma: Optional[Tensor]
    local_beta: Optional[Tensor]
    local_kernel: Optional[Tensor]
    local_bias: Optional[Tensor]
    global_gamma: Optional[Tensor]
    global_beta: Optional[Tensor]
    mamba: Optional[BiMambaParams]
    eps: float = 1e-5

    @classmethod
    def from_store(cls, store: ParamStore, prefix: str, eps: float = 1e-5) -> "HybridBlockParams":
        def get(name):
            return store[f"{prefix}.{name}"] if f"{prefix}.{name}" in store else None

        mamba = BiMambaParams.from_store(store, f"{prefix}.mamba") if get("global_norm.gamma") is not None else None
        return cls(
            local_gamma=get("local_norm.gamma"),
            local_beta=get("local_norm.beta"),
            local_kernel=get("local_conv.kernel"),
            local_bias=get("local_conv.bias"),
            global_gamma=get("global_norm.gamma"),
            global_beta=get("global_norm.beta"),
            mamba=mamba,
            eps=eps,
        )


def init_hybrid_block(
    store: ParamStore,
    prefix: str,
    config: "ModelConfig",
    conv_width: int,
    rng: np.random.Generator,
    zero_branches: bool = False,
) -> HybridBlockParams:
    d_model = config.d_model
    if not config.disable_cnn:
        store.declare(f"{prefix}.local_norm.gamma", np.ones(d_model))
        store.declare(f"{prefix}.local_norm.beta", np.zeros(d_model))
        kernel = np.zeros((conv_width, d_model)) if zero_branches else rng.normal(0.0, conv_width ** -0.5, (conv_width, d_model))
        store.declare(f"{prefix}.local_conv.kernel", kernel)
        store.declare(f"{prefix}.local_conv.bias", np.zeros(d_model))
    if not config.disable_mamba:
        store.declare(f"{prefix}.global_norm.gamma", np.ones(d_model))
        store.declare(f"{prefix}.global_norm.beta", np.zeros(d_model))
        init_bi_mamba_params(
            store, f"{prefix}.mamba", d_model, config.inner_width, config.d_state,
            config.mamba_conv_width, rng, dt_min=config.dt_min, dt_max=config.dt_max,
            zero_out=zero_branches,
        )
    return HybridBlockParams.from_store(store, prefix, eps=config.layer_norm_eps)


def hybrid_block(x: Tensor, params: HybridBlockParams) -> Tensor:
    """``x + dwconv(LN(x))`` followed by ``h + bi_mamba(LN(h))``."""
    if params.local_kernel is not None:
        normed = layer_norm(x, params.local_gamma, params.local_beta, params.eps)
        x = x + depthwise_conv1d(normed, params.local_kernel, params.local_bias)
    if params.mamba is not None:
        normed = layer_norm(x, params.global_gamma, params.global_beta, params.eps)
        x = x + bi_mamba(params.mamba, normed)
    return x


@dataclass(frozen=True)
class EncoderParams:
    """Projection to ``D`` plus the stacked hybrid blocks of one modality."""
    proj_weight: Tensor   # [K_p, D_m, D]
    proj_bias: Tensor
    blocks: Tuple[HybridBlockParams, ...]

    @property
    def in_dim(self) -> int:
        return self.proj_weight.shape[1]

    @classmethod
    def from_store(cls, store: ParamStore, prefix: str, depth: int, eps: float = 1e-5) -> "EncoderParams":
        return cls(
            proj_weight=store[f"{prefix}.proj.weight"],
            proj_bias=store[f"{prefix}.proj.bias"],
            blocks=tuple(HybridBlockParams.from_store(store, f"{prefix}.blocks.{i}", eps) for i in range(depth)),
        )


def init_encoder_params(
    store: ParamStore,
    prefix: str,
    in_dim: int,
    config: "ModelConfig",
    rng: np.random.Generator,
    zero_branches: bool = False,
) -> EncoderParams:
    if in_dim < 1:
        raise ConfigurationError(f"{prefix}: input width must be positive, got {in_dim}")
    fan_in = config.proj_width * in_dim
    bound = 1.0 / np.sqrt(fan_in)
    store.declare(f"{prefix}.proj.weight", rng.uniform(-bound, bound, (config.proj_width, in_dim, config.d_model)))
    store.declare(f"{prefix}.proj.bias", np.zeros(config.d_model))
    for i in range(config.encoder_depth):
        init_hybrid_block(store, f"{prefix}.blocks.{i}", config, config.local_conv_width, rng, zero_branches)
    return EncoderParams.from_store(store, prefix, config.encoder_depth, config.layer_norm_eps)


def embed(x: Union[Tensor, np.ndarray], params: EncoderParams) -> Tensor:
    """Project ``[..., L, D_m]`` to ``[..., L, D]`` with a "same" convolution.

    Raises:
        ConfigurationError: If the feature width is not ``D_m``.
    """
    x = as_tensor(x, like=params.proj_weight)
    if x.shape[-1] != params.in_dim:
        raise ConfigurationError(f"encoder expects {params.in_dim} input features, got {x.shape[-1]}")
    return conv1d(x, params.proj_weight, params.proj_bias)


def hierarchical_encode(h: Tensor, params: EncoderParams) -> Tensor:
    """Run every hybrid block of the encoder; shape is preserved."""
    for block in params.blocks:
        h = hybrid_block(h, block)
    return h


def encode(x: Union[Tensor, np.ndarray], params: EncoderParams) -> Tensor:
    return hierarchical_encode(embed(x, params), params)
