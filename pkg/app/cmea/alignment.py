"""Cross-modal enhancement and alignment.

Vision and audio tokens are randomly swapped for the matching text tokens
during training, passed through modality-specific proxy MLPs and pulled
towards their own utterance's text with an InfoNCE objective whose
negatives are the other utterances of the batch.
"""

from dataclasses import dataclass
from typing import TYPE_CHECKING, Union

import numpy as np

from app.exceptions import ContractError, DimensionError
from app.tensor import (
    ParamStore,
    Tensor,
    l2_normalize,
    linear,
    log_softmax,
    mean_axis,
    silu,
    swapaxes,
    where,
)

if TYPE_CHECKING:
    from app.model.schemas import ModelConfig

SeedLike = Union[int, np.random.Generator, None]


@dataclass(frozen=True)
class ProxyParams:
    """Tokenwise ``D -> D_h -> D`` perceptron with a SiLU hidden layer."""
    w1: Tensor
    b1: Tensor
    w2: Tensor
    b2: Tensor

    @classmethod
    def from_store(cls, store: ParamStore, prefix: str) -> "ProxyParams":
        return cls(
            w1=store[f"{prefix}.fc1.weight"],
            b1=store[f"{prefix}.fc1.bias"],
            w2=store[f"{prefix}.fc2.weight"],
            b2=store[f"{prefix}.fc2.bias"],
        )


@dataclass(frozen=True)
class CmeaParams:
    vision: ProxyParams
    audio: ProxyParams
    mix_threshold: float = 0.5
    temperature: float = 0.1

    def __post_init__(self):
        if not 0.0 <= self.mix_threshold <= 1.0:
            raise ContractError(f"mix threshold must lie in [0, 1], got {self.mix_threshold}")
        if self.temperature <= 0:
            raise ContractError(f"temperature must be positive, got {self.temperature}")

    @classmethod
    def from_store(
        cls, store: ParamStore, prefix: str, mix_threshold: float = 0.5, temperature: float = 0.1
    ) -> "CmeaParams":
        return cls(
            vision=ProxyParams.from_store(store, f"{prefix}.vision"),
            audio=ProxyParams.from_store(store, f"{prefix}.audio"),
            mix_threshold=mix_threshold,
            temperature=temperature,
        )


@dataclass(frozen=True)
class ProxyFeatures:
    vision: Tensor
    audio: Tensor
    mixed_vision: Tensor
    mixed_audio: Tensor


def init_cmea_params(
    store: ParamStore,
    prefix: str,
    config: "ModelConfig",
    rng: np.random.Generator,
    zero_branches: bool = False,
) -> CmeaParams:
    d_model, hidden = config.d_model, config.hidden_width
    for modality in ("vision", "audio"):
        base = f"{prefix}.{modality}"
        if zero_branches:
            w1, w2 = np.zeros((d_model, hidden)), np.zeros((hidden, d_model))
        else:
            w1 = rng.uniform(-1.0, 1.0, (d_model, hidden)) / np.sqrt(d_model)
            w2 = rng.uniform(-1.0, 1.0, (hidden, d_model)) / np.sqrt(hidden)
        store.declare(f"{base}.fc1.weight", w1)
        store.declare(f"{base}.fc1.bias", np.zeros(hidden))
        store.declare(f"{base}.fc2.weight", w2)
        store.declare(f"{base}.fc2.bias", np.zeros(d_model))
    return CmeaParams.from_store(store, prefix, config.mix_threshold, config.temperature)


def _generator(seed: SeedLike) -> np.random.Generator:
    return seed if isinstance(seed, np.random.Generator) else np.random.default_rng(seed)


def mix_tokens(u_m: Tensor, u_t: Tensor, p_star: float, seed: SeedLike = None) -> Tensor:
    """Replace each token of ``u_m`` by the text token when ``p ~ U(0, 1)`` exceeds ``p_star``.

    Every output token is an exact copy of one of its two sources. At
    ``p_star == 0`` all tokens are replaced.

    Raises:
        DimensionError: If the shapes differ.
    """
    if u_m.shape != u_t.shape:
        raise DimensionError(f"cannot mix tokens of shapes {u_m.shape} and {u_t.shape}")
    draws = _generator(seed).random(u_m.shape[:-1])
    take_text = draws > p_star if p_star > 0 else np.ones_like(draws, dtype=bool)
    return where(take_text[..., None], u_t, u_m)


def proxy_forward(u: Tensor, params: ProxyParams) -> Tensor:
    return linear(silu(linear(u, params.w1, params.b1)), params.w2, params.b2)


def token_avg_cosine(e: Tensor, u_t: Tensor) -> Tensor:
    """Mean over tokens of the cosine similarity of paired ``[..., L, D]`` tokens.

    Zero tokens contribute 0.
    """
    if e.shape != u_t.shape:
        raise DimensionError(f"cosine needs equal shapes, got {e.shape} and {u_t.shape}")
    products = (l2_normalize(e, axis=-1) * l2_normalize(u_t, axis=-1)).sum(axis=-1)
    return mean_axis(products, axis=-1)


def similarity_matrix(e: Tensor, u_t: Tensor) -> Tensor:
    """``[B, B]`` token-averaged cosine between every proxy sample and every text sample."""
    if e.ndim != 3 or e.shape != u_t.shape:
        raise DimensionError(f"similarity needs two [B, L, D] tensors, got {e.shape} and {u_t.shape}")
    batch, length, width = e.shape
    left = l2_normalize(e, axis=-1).reshape(batch, length * width)
    right = l2_normalize(u_t, axis=-1).reshape(batch, length * width)
    return (left @ swapaxes(right, 0, 1)) / float(length)


def contrastive_loss(similarity: Tensor, temperature: float) -> Tensor:
    """``mean_i -log softmax_j(S[i, j] / tau)[i]`` for a square ``[B, B]`` similarity matrix.

    Raises:
        ContractError: If ``temperature`` is not positive.
        DimensionError: If ``similarity`` is not square.
    """
    if temperature <= 0:
        raise ContractError(f"temperature must be positive, got {temperature}")
    if similarity.ndim != 2 or similarity.shape[0] != similarity.shape[1]:
        raise DimensionError(f"similarity must be a square matrix, got {similarity.shape}")
    batch = similarity.shape[0]
    log_probs = log_softmax(similarity / temperature)
    return -(log_probs * np.eye(batch)).sum() / float(batch)


def infonce_loss(e_v: Tensor, e_a: Tensor, u_t: Tensor, temperature: float) -> Tensor:
    """Symmetric-over-modalities InfoNCE against in-batch text negatives.

    ``0.5 * sum_m mean_i -log softmax_j(sim(E_m[i], U_t[j]) / tau)[i]``.

    Raises:
        ContractError: If ``temperature`` is not positive.
        DimensionError: If the three inputs differ in shape.
    """
    if temperature <= 0:
        raise ContractError(f"temperature must be positive, got {temperature}")
    if e_v.shape != u_t.shape or e_a.shape != u_t.shape:
        raise DimensionError(f"InfoNCE inputs differ: {e_v.shape}, {e_a.shape}, {u_t.shape}")
    total = None
    for e in (e_v, e_a):
        term = contrastive_loss(similarity_matrix(e, u_t), temperature)
        total = term if total is None else total + term
    return total * 0.5


def enhance(
    u_t: Tensor,
    u_v: Tensor,
    u_a: Tensor,
    params: CmeaParams,
    training: bool,
    seed: SeedLike = None,
) -> ProxyFeatures:
    """Proxy embeddings for vision and audio; token mixing only when ``training``."""
    if training:
        rng = _generator(seed)
        mixed_v = mix_tokens(u_v, u_t, params.mix_threshold, rng)
        mixed_a = mix_tokens(u_a, u_t, params.mix_threshold, rng)
    else:
        mixed_v, mixed_a = u_v, u_a
    return ProxyFeatures(
        vision=proxy_forward(mixed_v, params.vision),
        audio=proxy_forward(mixed_a, params.audio),
        mixed_vision=mixed_v,
        mixed_audio=mixed_a,
    )
