"""Interleaved mix-up fusion, pooling, prediction and the training objective."""

from dataclasses import dataclass
from typing import TYPE_CHECKING, Tuple, Union

import numpy as np

from app.exceptions import ConfigurationError, ContractError, DimensionError
from app.pipeline.encoder import HybridBlockParams, hybrid_block, init_hybrid_block
from app.tensor import ParamStore, Tensor, as_tensor, linear, mean_axis, stack, take

if TYPE_CHECKING:
    from app.model.schemas import ModelConfig


@dataclass(frozen=True)
class FusionParams:
    """``Z`` hybrid blocks over the ``3L`` fused sequence and a linear ``D -> 1`` head."""
    blocks: Tuple[HybridBlockParams, ...]
    head_weight: Tensor   # [D, 1]
    head_bias: Tensor     # [1]

    @classmethod
    def from_store(cls, store: ParamStore, prefix: str, n_blocks: int, eps: float = 1e-5) -> "FusionParams":
        return cls(
            blocks=tuple(HybridBlockParams.from_store(store, f"{prefix}.blocks.{z}", eps) for z in range(n_blocks)),
            head_weight=store[f"{prefix}.head.weight"],
            head_bias=store[f"{prefix}.head.bias"],
        )


def init_fusion_params(
    store: ParamStore,
    prefix: str,
    config: "ModelConfig",
    rng: np.random.Generator,
    zero_branches: bool = False,
) -> FusionParams:
    if config.n_fusion_blocks < 1:
        raise ConfigurationError(f"need at least one fusion block, got {config.n_fusion_blocks}")
    for z in range(config.n_fusion_blocks):
        init_hybrid_block(store, f"{prefix}.blocks.{z}", config, config.fusion_conv_width, rng, zero_branches)
    head = np.zeros((config.d_model, 1)) if zero_branches else rng.normal(0.0, config.d_model ** -0.5, (config.d_model, 1))
    store.declare(f"{prefix}.head.weight", head)
    store.declare(f"{prefix}.head.bias", np.zeros(1))
    return FusionParams.from_store(store, prefix, config.n_fusion_blocks, config.layer_norm_eps)


def interleave(e_v: Tensor, u_t: Tensor, e_a: Tensor) -> Tensor:
    """``[..., L, D]`` x3 -> ``[..., 3L, D]`` ordered vision, text, audio at every step.

    Raises:
        DimensionError: If the three shapes differ.
    """
    if not e_v.shape == u_t.shape == e_a.shape:
        raise DimensionError(f"cannot interleave shapes {e_v.shape}, {u_t.shape}, {e_a.shape}")
    if u_t.ndim < 2:
        raise DimensionError(f"interleave expects [..., L, D], got {u_t.shape}")
    stacked = stack([e_v, u_t, e_a], axis=-2)          # [..., L, 3, D]
    shape = u_t.shape[:-2] + (3 * u_t.shape[-2], u_t.shape[-1])
    return stacked.reshape(*shape)


def deinterleave(m: Tensor) -> Tuple[Tensor, Tensor, Tensor]:
    """Inverse of ``interleave``; token ``k`` came from modality ``k mod 3``."""
    if m.ndim < 2 or m.shape[-2] % 3:
        raise DimensionError(f"fused length must be a multiple of 3, got {m.shape}")
    shape = m.shape[:-2] + (m.shape[-2] // 3, 3, m.shape[-1])
    grouped = m.reshape(*shape)
    return tuple(take(grouped, k, axis=-2) for k in range(3))


def fusion_block(m: Tensor, params: HybridBlockParams) -> Tensor:
    return hybrid_block(m, params)


def fusion_stack(m: Tensor, params: FusionParams) -> Tensor:
    for block in params.blocks:
        m = fusion_block(m, block)
    return m


def pool_predict(f: Tensor, params: FusionParams) -> Tensor:
    """Mean over the fused sequence then the linear head; ``[..., 3L, D] -> [...]``."""
    if f.ndim < 2:
        raise DimensionError(f"pool_predict expects [..., 3L, D], got {f.shape}")
    lead = f.shape[:-2]
    pooled = mean_axis(f, axis=-2).reshape(*lead, 1, f.shape[-1])
    out = linear(pooled, params.head_weight, params.head_bias)   # [..., 1, 1]
    return out.reshape(*lead)


def prediction_loss(predictions: Tensor, labels: Union[Tensor, np.ndarray]) -> Tensor:
    labels = as_tensor(labels, like=predictions)
    if predictions.shape != labels.shape:
        raise DimensionError(f"predictions {predictions.shape} and labels {labels.shape} differ")
    diff = predictions - labels
    return (diff * diff).sum() / float(max(diff.size, 1))


def total_loss(
    predictions: Tensor,
    labels: Union[Tensor, np.ndarray],
    alignment: Union[Tensor, float],
    alpha: float,
) -> Tensor:
    """``mean((y_hat - y)^2) + alpha * L_c``.

    Raises:
        ContractError: If ``alpha`` is negative.
    """
    if alpha < 0:
        raise ContractError(f"alpha must be non-negative, got {alpha}")
    loss = prediction_loss(predictions, labels)
    if alpha == 0:
        return loss
    return loss + as_tensor(alignment, like=loss) * alpha
