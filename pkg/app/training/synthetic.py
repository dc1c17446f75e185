"""Synthetic multimodal sentiment data and closed-form baselines."""

from pathlib import Path
from typing import Optional, Sequence, Tuple, Union

import numpy as np
from loguru import logger
from sklearn.linear_model import Ridge

from app.exceptions import ContractError, EmptyInputError
from app.pipeline.data import MODALITIES, MultimodalDataset, Utterance, write_dataset

DEFAULT_LENGTHS = (24, 32, 40)
DEFAULT_DIMS = (8, 12, 6)
NOISE_SCALE = {"text": 1.0, "vision": 2.0, "audio": 3.0}
SPLIT_FRACTIONS = (0.7, 0.1)

NoiseLike = Union[float, Tuple[float, float, float]]


def _noise_levels(noise: NoiseLike) -> Tuple[float, float, float]:
    if np.isscalar(noise):
        levels = tuple(float(noise) * NOISE_SCALE[m] for m in MODALITIES)
    else:
        levels = tuple(float(x) for x in noise)
    if len(levels) != 3 or min(levels) < 0:
        raise ContractError(f"noise must be one non-negative level or three, got {noise}")
    return levels


def split_counts(n: int) -> Tuple[int, int, int]:
    n_train = int(round(SPLIT_FRACTIONS[0] * n))
    n_valid = min(int(round(SPLIT_FRACTIONS[1] * n)), n - n_train)
    return n_train, n_valid, n - n_train - n_valid


def generate_synthetic(
    out_dir: Optional[Union[str, Path]],
    n: int,
    lengths: Sequence[int] = DEFAULT_LENGTHS,
    dims: Sequence[int] = DEFAULT_DIMS,
    noise: NoiseLike = 0.1,
    seed: int = 0,
) -> MultimodalDataset:
    """Generate ``n`` utterances whose label is a latent sentiment ``s ~ U(-3, 3)``.

    Every modality stream is ``s * w_m`` plus an ``s``-scaled sinusoid along a
    second direction, a nuisance signal for vision and audio, and Gaussian
    noise. The sinusoid and nuisance are zero-mean over each utterance and
    the text embedding has ``w_t[0] = 1``, so with zero noise the time average
    of the first text feature equals ``s``. A scalar ``noise`` is the text
    level; vision and audio get twice and three times as much.

    Args:
        out_dir: Dataset root to write, or ``None`` to keep it in memory.

    Raises:
        ContractError: If ``n < 1`` or a length or dim is not positive.
        DatasetError: If writing fails.
    """
    if n < 1:
        raise ContractError(f"need at least one utterance, got n={n}")
    if len(lengths) != 3 or len(dims) != 3 or min(*lengths, *dims) < 1:
        raise ContractError(f"lengths and dims need three positive values, got {lengths}, {dims}")
    levels = dict(zip(MODALITIES, _noise_levels(noise)))

    rng = np.random.default_rng(seed)
    embedding, temporal, nuisance = {}, {}, {}
    for modality, width in zip(MODALITIES, dims):
        embedding[modality] = rng.normal(size=width)
        temporal[modality] = rng.normal(size=width) / np.sqrt(width)
        nuisance[modality] = rng.normal(size=width) / np.sqrt(width)
    embedding["text"][0] = 1.0

    order = rng.permutation(n)
    n_train, n_valid, _ = split_counts(n)
    splits = np.empty(n, dtype=object)
    splits[order[:n_train]] = "train"
    splits[order[n_train:n_train + n_valid]] = "valid"
    splits[order[n_train + n_valid:]] = "test"

    utterances = []
    for i in range(n):
        s = float(rng.uniform(-3.0, 3.0))
        features = {}
        for modality, max_len in zip(MODALITIES, lengths):
            steps = int(rng.integers(-(-max_len // 2), max_len + 1))
            t = np.arange(steps)
            wave = 0.5 * s * np.sin(2.0 * np.pi * t / max_len + rng.uniform(0.0, 2.0 * np.pi))
            wave -= wave.mean()
            x = s * embedding[modality][None, :] + wave[:, None] * temporal[modality][None, :]
            if modality != "text":
                drift = rng.normal(size=steps)
                x += (drift - drift.mean())[:, None] * nuisance[modality][None, :]
            if levels[modality] > 0:
                x += levels[modality] * rng.normal(size=x.shape)
            features[modality] = x
        utterances.append(Utterance(f"utt{i:05d}", s, str(splits[i]), features))

    dataset = MultimodalDataset(utterances, root=Path(out_dir) if out_dir is not None else None)
    if out_dir is not None:
        write_dataset(out_dir, utterances)
    logger.info(f"Generated {n} synthetic utterances ({n_train} train, {n_valid} valid)")
    return dataset


def _time_average(utterances: Sequence[Utterance], modality: str) -> np.ndarray:
    return np.stack([u.features[modality].mean(axis=0) for u in utterances])


def ridge_baseline(
    train: Sequence[Utterance],
    test: Sequence[Utterance],
    alpha: float = 1e-3,
    modality: str = "text",
) -> Tuple[np.ndarray, float]:
    """Ridge regression on time-averaged features; returns test predictions and MAE."""
    if not train or not test:
        raise EmptyInputError("ridge baseline needs non-empty train and test sets")
    model = Ridge(alpha=alpha)
    model.fit(_time_average(train, modality), np.array([u.label for u in train]))
    preds = model.predict(_time_average(test, modality))
    mae = float(np.mean(np.abs(preds - np.array([u.label for u in test]))))
    return preds, mae


def mean_baseline_mae(train: Sequence[Utterance], test: Sequence[Utterance]) -> float:
    """MAE of always predicting the training label mean."""
    if not train or not test:
        raise EmptyInputError("mean baseline needs non-empty train and test sets")
    mean = np.mean([u.label for u in train])
    return float(np.mean([abs(u.label - mean) for u in test]))
