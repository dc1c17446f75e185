"""Configuration and report schemas."""

from typing import Dict, List, Literal, Optional

from pydantic import BaseModel, ConfigDict, Field, model_validator


class ModelConfig(BaseModel):
    """Hyperparameters and ablation toggles of one HCMEN model."""
    model_config = ConfigDict(extra="forbid")

    # Shapes
    seq_len: int = Field(16, ge=1, description="Resampled sequence length L")
    d_model: int = Field(32, ge=1, description="Shared model width D")
    d_state: int = Field(8, ge=1, description="SSM state size N per channel")
    d_inner: Optional[int] = Field(None, ge=1, description="Mamba inner width, defaults to 2D")
    n_fusion_blocks: int = Field(2, ge=1)
    mamba_conv_width: int = Field(4, ge=1)
    proj_width: int = Field(1, ge=1)
    local_conv_width: int = Field(3, ge=1)
    fusion_conv_width: int = Field(3, ge=1)
    encoder_depth: int = Field(1, ge=1)
    proxy_hidden: Optional[int] = Field(None, ge=1, description="Proxy MLP hidden width, defaults to 2D")

    # Alignment
    mix_threshold: float = Field(0.5, ge=0.0, le=1.0)
    temperature: float = Field(0.1, gt=0.0)
    alpha: float = Field(0.1, ge=0.0)

    # Optimization
    learning_rate: float = Field(1e-3, gt=0.0)
    batch_size: int = Field(32, ge=1)
    epochs: int = Field(50, ge=1)
    seed: int = 0

    # Missing-modality protocol
    missing_rate: float = Field(0.0, ge=0.0, le=1.0)
    substitution_mode: Literal["zero", "random"] = "zero"
    corruption_granularity: Literal["token", "modality"] = "token"
    corrupt_text: bool = True

    # Ablations
    disable_cnn: bool = False
    disable_mamba: bool = False
    disable_cmea: bool = False

    # Numerics
    layer_norm_eps: float = Field(1e-5, gt=0.0)
    dt_min: float = Field(1e-3, gt=0.0)
    dt_max: float = Field(1e-1, gt=0.0)

    @model_validator(mode="after")
    def validate_widths(self):
        for name in ("proj_width", "local_conv_width", "fusion_conv_width"):
            if getattr(self, name) % 2 == 0:
                raise ValueError(f"{name} must be odd for length-preserving convolution")
        if self.dt_min > self.dt_max:
            raise ValueError("dt_min must not exceed dt_max")
        return self

    @property
    def inner_width(self) -> int:
        return self.d_inner or 2 * self.d_model

    @property
    def hidden_width(self) -> int:
        return self.proxy_hidden or 2 * self.d_model

    @property
    def effective_alpha(self) -> float:
        return 0.0 if self.disable_cmea else self.alpha


class MetricsReport(BaseModel):
    """Regression and derived classification metrics, fractions in ``[0, 1]``."""
    acc7: float = Field(..., ge=0.0, le=1.0)
    acc5: float = Field(..., ge=0.0, le=1.0)
    acc2_has0: float = Field(..., ge=0.0, le=1.0)
    acc2_non0: float = Field(..., ge=0.0, le=1.0)
    f1_has0: float = Field(..., ge=0.0, le=1.0)
    f1_non0: float = Field(..., ge=0.0, le=1.0)
    mae: float = Field(..., ge=0.0)
    corr: float = Field(..., ge=-1.0, le=1.0)
    n_samples: int = Field(..., ge=1)
    corr_undefined: bool = False


class EpochRecord(BaseModel):
    """One row of the training metrics log."""
    epoch: int
    loss_p: float
    loss_c: float
    loss_total: float
    validation: Optional[MetricsReport] = None

    def csv_row(self) -> List[str]:
        v = self.validation
        metrics = (
            [v.mae, v.acc7, v.acc5, v.acc2_has0, v.acc2_non0, v.f1_has0, v.f1_non0, v.corr]
            if v is not None else [float("nan")] * 8
        )
        return [str(self.epoch)] + [repr(float(x)) for x in [self.loss_p, self.loss_c, self.loss_total, *metrics]]


class TrainingResult(BaseModel):
    """Outcome of a training run."""
    checkpoint_path: str
    metrics_path: Optional[str] = None
    best_epoch: int
    best_val_mae: float
    num_parameters: int = 0
    history: List[EpochRecord] = Field(default_factory=list)


class MetricSummary(BaseModel):
    """Spread of one metric over training seeds."""
    mean: float
    std: float
    median: float


class SeedAggregate(BaseModel):
    """Metrics of one experiment cell summarized over its seeds."""
    label: str
    missing_rate: Optional[float] = None
    seeds: List[int]
    num_parameters: Optional[int] = None
    mae_delta: Optional[float] = Field(None, description="Median MAE minus the full model's median MAE")
    metrics: Dict[str, MetricSummary]

    def csv_row(self, metric_names: List[str]) -> List[str]:
        rate = "" if self.missing_rate is None else repr(float(self.missing_rate))
        cells = [self.label, rate, str(len(self.seeds))]
        for name in metric_names:
            summary = self.metrics[name]
            cells += [repr(summary.mean), repr(summary.std), repr(summary.median)]
        return cells
