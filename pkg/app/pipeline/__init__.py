"""Dataset IO, missing-modality corruption and the unimodal encoders."""

from app.pipeline.corruption import corrupt
from app.pipeline.data import (
    MANIFEST_NAME,
    MODALITIES,
    SPLITS,
    ModalityBatch,
    MultimodalDataset,
    Utterance,
    collate,
    iter_batches,
    load_dataset,
    write_dataset,
)
from app.pipeline.encoder import (
    EncoderParams,
    HybridBlockParams,
    embed,
    encode,
    hierarchical_encode,
    hybrid_block,
    init_encoder_params,
    init_hybrid_block,
    resample_batch,
    resample_time,
)

__all__ = [
    "MANIFEST_NAME",
    "MODALITIES",
    "SPLITS",
    "EncoderParams",
    "HybridBlockParams",
    "ModalityBatch",
    "MultimodalDataset",
    "Utterance",
    "collate",
    "corrupt",
    "embed",
    "encode",
    "hierarchical_encode",
    "hybrid_block",
    "init_encoder_params",
    "init_hybrid_block",
    "iter_batches",
    "load_dataset",
    "resample_batch",
    "resample_time",
    "write_dataset",
]
