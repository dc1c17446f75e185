"""HCMEN configuration, reports and model assembly."""

from app.model.network import HCMEN, ForwardOutput, LossBreakdown
from app.model.schemas import EpochRecord, MetricsReport, MetricSummary, ModelConfig, SeedAggregate, TrainingResult

__all__ = [
    "HCMEN",
    "EpochRecord",
    "ForwardOutput",
    "LossBreakdown",
    "MetricSummary",
    "MetricsReport",
    "ModelConfig",
    "SeedAggregate",
    "TrainingResult",
]
