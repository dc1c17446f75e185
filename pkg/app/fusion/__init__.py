"""Mix-up fusion over interleaved modality tokens."""

from app.fusion.head import (
    FusionParams,
    deinterleave,
    fusion_block,
    fusion_stack,
    init_fusion_params,
    interleave,
    pool_predict,
    prediction_loss,
    total_loss,
)

__all__ = [
    "FusionParams",
    "deinterleave",
    "fusion_block",
    "fusion_stack",
    "init_fusion_params",
    "interleave",
    "pool_predict",
    "prediction_loss",
    "total_loss",
]
