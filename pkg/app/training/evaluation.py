"""Evaluation under the missing-modality protocol."""

from concurrent.futures import ThreadPoolExecutor
from pathlib import Path
from typing import List, Optional, Sequence, Tuple, Union

import numpy as np
from loguru import logger

from app.config import settings
from app.exceptions import ContractError, EmptyInputError
from app.model.network import HCMEN
from app.model.schemas import MetricsReport, ModelConfig
from app.pipeline import MultimodalDataset, Utterance, collate, corrupt
from app.training.checkpoint import load_model
from app.training.metrics import compute_metrics
from app.utils.monitoring import track_stage

EVAL_BATCH_SIZE = 64


def batch_seed(seed: int, index: int) -> int:
    """Corruption seed of the ``index``-th evaluation batch, independent of sharding."""
    return int(np.random.SeedSequence([seed, index]).generate_state(1)[0])


def _predict_batches(
    model: HCMEN,
    batches: Sequence[Tuple[int, List[Utterance]]],
    rate: float,
    seed: int,
) -> List[Tuple[int, np.ndarray]]:
    config = model.config
    out = []
    for index, utterances in batches:
        batch = corrupt(
            collate(utterances), rate, batch_seed(seed, index),
            mode=config.substitution_mode,
            granularity=config.corruption_granularity,
            corrupt_text=config.corrupt_text,
        )
        out.append((index, model.predict(batch)))
    return out


def predict_split(
    model: HCMEN,
    utterances: Sequence[Utterance],
    rate: float = 0.0,
    seed: int = 0,
    workers: Optional[int] = None,
    batch_size: int = EVAL_BATCH_SIZE,
) -> Tuple[np.ndarray, np.ndarray]:
    """Predictions and labels for ``utterances`` after corruption at ``rate``.

    Batches are dealt round-robin to ``workers`` threads; the result does not
    depend on the worker count.
    """
    if not utterances:
        raise EmptyInputError("nothing to evaluate")
    if not 0.0 <= rate <= 1.0:
        raise ContractError(f"missing rate must lie in [0, 1], got {rate}")
    workers = max(1, workers or settings.EVAL_WORKERS)

    chunks = [
        (i, list(utterances[start:start + batch_size]))
        for i, start in enumerate(range(0, len(utterances), batch_size))
    ]
    shards = [chunks[k::workers] for k in range(workers) if chunks[k::workers]]
    if len(shards) == 1:
        results = _predict_batches(model, shards[0], rate, seed)
    else:
        with ThreadPoolExecutor(max_workers=len(shards)) as pool:
            futures = [pool.submit(_predict_batches, model, shard, rate, seed) for shard in shards]
            results = [item for future in futures for item in future.result()]

    results.sort(key=lambda item: item[0])
    preds = np.concatenate([p for _, p in results])
    labels = np.array([u.label for u in utterances], dtype=np.float64)
    return preds, labels


def evaluate_model(
    model: HCMEN,
    utterances: Sequence[Utterance],
    rate: float = 0.0,
    seed: int = 0,
    workers: Optional[int] = None,
) -> MetricsReport:
    preds, labels = predict_split(model, utterances, rate=rate, seed=seed, workers=workers)
    return compute_metrics(preds, labels)


@track_stage(name="evaluate")
def evaluate(
    checkpoint: Union[str, Path],
    dataset: MultimodalDataset,
    split: str = "test",
    rate: float = 0.0,
    seed: int = 0,
    workers: Optional[int] = None,
    config: Optional[ModelConfig] = None,
) -> MetricsReport:
    """Load a checkpoint and score one split at a fixed missing rate.

    Raises:
        CheckpointError: The checkpoint cannot be loaded or does not fit.
        EmptyInputError: The split is empty.
    """
    model = load_model(checkpoint, config)
    utterances = dataset.split(split)
    if not utterances:
        raise EmptyInputError(f"split '{split}' has no utterances")
    report = evaluate_model(model, utterances, rate=rate, seed=seed, workers=workers)
    logger.info(f"Evaluated {checkpoint} on {split} at r={rate}: MAE {report.mae:.4f}, corr {report.corr:.4f}")
    return report
