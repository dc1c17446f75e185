"""Missing-modality simulation by token masking or substitution."""

from typing import Dict

import numpy as np

from app.exceptions import ConfigurationError, ContractError
from app.pipeline.data import MODALITIES, ModalityBatch

SUBSTITUTION_MODES = ("zero", "random")
GRANULARITIES = ("token", "modality")


def corrupt(
    batch: ModalityBatch,
    rate: float,
    seed: int,
    mode: str = "zero",
    granularity: str = "token",
    corrupt_text: bool = True,
) -> ModalityBatch:
    """Drop available tokens independently with probability ``rate``.

    A dropped token has its mask bit cleared and its features replaced by
    zeros (``mode="zero"``) or standard normal draws (``mode="random"``).
    ``granularity="modality"`` drops a sample's whole stream at once. The
    input batch is not modified.

    Raises:
        ContractError: If ``rate`` is outside ``[0, 1]``.
        ConfigurationError: On an unknown mode or granularity.
    """
    if not 0.0 <= rate <= 1.0:
        raise ContractError(f"missing rate must lie in [0, 1], got {rate}")
    if mode not in SUBSTITUTION_MODES:
        raise ConfigurationError(f"unknown substitution mode '{mode}'")
    if granularity not in GRANULARITIES:
        raise ConfigurationError(f"unknown corruption granularity '{granularity}'")

    rng = np.random.default_rng(seed)
    features: Dict[str, np.ndarray] = {}
    masks: Dict[str, np.ndarray] = {}
    for modality in MODALITIES:
        x = batch.features[modality].copy()
        mask = batch.masks[modality].copy()
        if modality == "text" and not corrupt_text:
            features[modality], masks[modality] = x, mask
            continue

        if granularity == "token":
            draws = rng.random(mask.shape)
        else:
            draws = np.broadcast_to(rng.random((mask.shape[0], 1)), mask.shape)
        drop = (draws < rate) & (mask > 0)

        if mode == "zero":
            x[drop] = 0.0
        else:
            x[drop] = rng.standard_normal((int(drop.sum()), x.shape[-1]))
        mask[drop] = 0.0
        features[modality], masks[modality] = x, mask

    return batch.replace(features=features, masks=masks)
