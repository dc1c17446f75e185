"""Optimization, metrics, synthetic data, checkpoints, training and evaluation."""

from app.training.checkpoint import Checkpoint, load_checkpoint, load_model, save_checkpoint
from app.training.evaluation import evaluate, evaluate_model, predict_split
from app.training.experiments import ablation_study, robustness_sweep, summarize, write_summary_csv
from app.training.metrics import compute_metrics
from app.training.optimizer import AdamOptimizer, AdamState, adam_step
from app.training.synthetic import generate_synthetic, mean_baseline_mae, ridge_baseline
from app.training.trainer import CSV_HEADER, train

__all__ = [
    "CSV_HEADER",
    "AdamOptimizer",
    "AdamState",
    "Checkpoint",
    "ablation_study",
    "adam_step",
    "compute_metrics",
    "evaluate",
    "evaluate_model",
    "generate_synthetic",
    "load_checkpoint",
    "load_model",
    "mean_baseline_mae",
    "predict_split",
    "ridge_baseline",
    "robustness_sweep",
    "save_checkpoint",
    "summarize",
    "train",
    "write_summary_csv",
]
