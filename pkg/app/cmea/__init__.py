"""Cross-modal enhancement and alignment."""

from app.cmea.alignment import (
    CmeaParams,
    ProxyFeatures,
    ProxyParams,
    contrastive_loss,
    enhance,
    infonce_loss,
    init_cmea_params,
    mix_tokens,
    proxy_forward,
    similarity_matrix,
    token_avg_cosine,
)

__all__ = [
    "CmeaParams",
    "ProxyFeatures",
    "ProxyParams",
    "contrastive_loss",
    "enhance",
    "infonce_loss",
    "init_cmea_params",
    "mix_tokens",
    "proxy_forward",
    "similarity_matrix",
    "token_avg_cosine",
]
