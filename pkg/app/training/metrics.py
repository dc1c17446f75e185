"""Sentiment regression metrics with the has-zero / non-zero binary conventions."""

from typing import Sequence, Union

import numpy as np
from loguru import logger
from scipy.stats import pearsonr
from sklearn.metrics import f1_score

from app.exceptions import ContractError, EmptyInputError
from app.model.schemas import MetricsReport

ArrayLike = Union[Sequence[float], np.ndarray]


def _class_accuracy(preds: np.ndarray, labels: np.ndarray, bound: float) -> float:
    return float(np.mean(np.round(np.clip(preds, -bound, bound)) == np.round(np.clip(labels, -bound, bound))))


def compute_metrics(preds: ArrayLike, labels: ArrayLike) -> MetricsReport:
    """Score regression outputs against sentiment labels.

    Acc-7 and Acc-5 compare rounded values after clamping to ``[-3, 3]`` and
    ``[-2, 2]``. The has-zero binary task splits ``y < 0`` from ``y >= 0``
    over all samples; the non-zero task drops ``y == 0`` and splits ``y < 0``
    from ``y > 0``. F1 is class-frequency weighted.

    Raises:
        EmptyInputError: No samples.
        ContractError: Length mismatch or non-finite values.
    """
    preds = np.asarray(preds, dtype=np.float64).reshape(-1)
    labels = np.asarray(labels, dtype=np.float64).reshape(-1)
    if preds.size == 0:
        raise EmptyInputError("cannot score an empty prediction set")
    if preds.shape != labels.shape:
        raise ContractError(f"{preds.size} predictions for {labels.size} labels")
    if not (np.all(np.isfinite(preds)) and np.all(np.isfinite(labels))):
        raise ContractError("predictions and labels must be finite")

    has0_true, has0_pred = labels >= 0, preds >= 0
    nonzero = labels != 0
    if nonzero.any():
        non0_true, non0_pred = labels[nonzero] > 0, preds[nonzero] > 0
        acc2_non0 = float(np.mean(non0_true == non0_pred))
        f1_non0 = float(f1_score(non0_true, non0_pred, average="weighted", zero_division=0))
    else:
        acc2_non0 = f1_non0 = 0.0

    corr_undefined = bool(np.ptp(preds) == 0 or np.ptp(labels) == 0)
    if corr_undefined:
        logger.warning("correlation undefined for constant predictions or labels; reporting 0")
        corr = 0.0
    else:
        corr = float(np.clip(pearsonr(preds, labels)[0], -1.0, 1.0))

    return MetricsReport(
        acc7=_class_accuracy(preds, labels, 3.0),
        acc5=_class_accuracy(preds, labels, 2.0),
        acc2_has0=float(np.mean(has0_true == has0_pred)),
        acc2_non0=acc2_non0,
        f1_has0=float(f1_score(has0_true, has0_pred, average="weighted", zero_division=0)),
        f1_non0=f1_non0,
        mae=float(np.mean(np.abs(preds - labels))),
        corr=corr,
        n_samples=int(preds.size),
        corr_undefined=corr_undefined,
    )
