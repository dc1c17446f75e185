"""Training loop."""

import csv
from pathlib import Path
from typing import Optional, Union

import numpy as np
from loguru import logger

from app.exceptions import EmptyInputError, NumericError
from app.model.network import HCMEN
from app.model.schemas import EpochRecord, ModelConfig, TrainingResult
from app.pipeline import MultimodalDataset, corrupt, iter_batches
from app.tensor import backward, find_first_nonfinite
from app.training.checkpoint import save_checkpoint
from app.training.evaluation import evaluate_model
from app.training.optimizer import AdamOptimizer
from app.utils.monitoring import record_epoch, track_stage

CSV_HEADER = [
    "epoch", "loss_p", "loss_c", "loss_total",
    "val_mae", "val_acc7", "val_acc5", "val_acc2_has0", "val_acc2_non0",
    "val_f1_has0", "val_f1_non0", "val_corr",
]

PathLike = Union[str, Path]


def _fresh_seed(rng: np.random.Generator) -> int:
    return int(rng.integers(0, 2**31 - 1))


@track_stage(name="train")
def train(
    config: ModelConfig,
    dataset: MultimodalDataset,
    out_path: PathLike,
    metrics_path: Optional[PathLike] = None,
    model: Optional[HCMEN] = None,
) -> TrainingResult:
    """Fit a model on the train split and keep the best-validation-MAE checkpoint.

    Every batch is corrupted at ``config.missing_rate`` with a fresh seed and
    its token mixing gets another; validation uses the fixed ``config.seed``.
    Without a validation split the train split is scored instead.

    Raises:
        EmptyInputError: The train split is empty.
        NumericError: The loss becomes non-finite; the message names the
            first non-finite tensor of the forward pass.
    """
    train_set = dataset.split("train")
    if not train_set:
        raise EmptyInputError("dataset has no training utterances")
    valid_set = dataset.split("valid")
    if not valid_set:
        logger.warning("No validation split; selecting checkpoints on the training split")
        valid_set = train_set

    model = model or HCMEN(config, dataset.dims)
    optimizer = AdamOptimizer(model.params, lr=config.learning_rate)
    rng = np.random.default_rng(config.seed)
    logger.info(
        f"Training {model.num_parameters()} parameters on {len(train_set)} utterances "
        f"for {config.epochs} epochs (missing rate {config.missing_rate})"
    )

    writer, handle = None, None
    if metrics_path is not None:
        Path(metrics_path).parent.mkdir(parents=True, exist_ok=True)
        handle = open(metrics_path, "w", newline="", encoding="utf-8")
        writer = csv.writer(handle)
        writer.writerow(CSV_HEADER)

    history = []
    best_mae, best_epoch = float("inf"), -1
    try:
        for epoch in range(config.epochs):
            totals = np.zeros(3)
            seen = 0
            for batch in iter_batches(train_set, config.batch_size, seed=_fresh_seed(rng)):
                batch = corrupt(
                    batch, config.missing_rate, _fresh_seed(rng),
                    mode=config.substitution_mode,
                    granularity=config.corruption_granularity,
                    corrupt_text=config.corrupt_text,
                )
                optimizer.zero_grad()
                losses = model.loss(batch, training=True, seed=_fresh_seed(rng))
                if not np.isfinite(losses.total.item()):
                    culprit = find_first_nonfinite(losses.total)
                    raise NumericError(f"non-finite loss at epoch {epoch}; first non-finite tensor: {culprit}")
                backward(losses.total, model.params)
                optimizer.step()

                totals += batch.size * np.array([losses.prediction.item(), losses.alignment.item(), losses.total.item()])
                seen += batch.size

            loss_p, loss_c, loss_total = totals / seen
            report = evaluate_model(model, valid_set, rate=config.missing_rate, seed=config.seed)
            record = EpochRecord(epoch=epoch, loss_p=loss_p, loss_c=loss_c, loss_total=loss_total, validation=report)
            history.append(record)
            if writer is not None:
                writer.writerow(record.csv_row())
                handle.flush()
            record_epoch(loss_p, loss_c, loss_total, report.mae)
            logger.info(
                f"epoch {epoch}: L_p={loss_p:.4f} L_c={loss_c:.4f} L_total={loss_total:.4f} "
                f"val_mae={report.mae:.4f} val_corr={report.corr:.4f}"
            )

            if report.mae < best_mae:
                best_mae, best_epoch = report.mae, epoch
                save_checkpoint(model.params, config, out_path, dims=model.dims)
    finally:
        if handle is not None:
            handle.close()

    logger.info(f"Best validation MAE {best_mae:.4f} at epoch {best_epoch}; checkpoint {out_path}")
    return TrainingResult(
        checkpoint_path=str(out_path),
        metrics_path=str(metrics_path) if metrics_path is not None else None,
        best_epoch=best_epoch,
        best_val_mae=best_mae,
        num_parameters=model.num_parameters(),
        history=history,
    )
