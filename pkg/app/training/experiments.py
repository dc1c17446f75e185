"""Multi-seed experiments: missing-rate robustness sweeps and component ablations.

Both workflows train one model per seed with ``train`` and score the best
checkpoint on a held-out split, so their numbers carry the same corruption
protocol as ``evaluate``.
"""

import csv
from pathlib import Path
from typing import Dict, List, Mapping, Optional, Sequence, Union

import numpy as np
from loguru import logger

from app.exceptions import ContractError, EmptyInputError
from app.model.network import HCMEN
from app.model.schemas import MetricsReport, MetricSummary, ModelConfig, SeedAggregate
from app.pipeline import MultimodalDataset
from app.training.checkpoint import load_model
from app.training.evaluation import evaluate_model
from app.training.trainer import train
from app.utils.monitoring import track_stage

PathLike = Union[str, Path]

DEFAULT_SWEEP_RATES = tuple(round(0.1 * k, 1) for k in range(10))
DEFAULT_ABLATION_RATE = 0.5
SUMMARY_METRICS = ["mae", "corr", "acc7", "acc5", "acc2_has0", "acc2_non0", "f1_has0", "f1_non0"]
ABLATIONS: Dict[str, Dict[str, bool]] = {
    "full": {},
    "w/o CNN": {"disable_cnn": True},
    "w/o Mamba": {"disable_mamba": True},
    "w/o CMEA": {"disable_cmea": True},
}


def summarize(reports: Sequence[MetricsReport]) -> Dict[str, MetricSummary]:
    """Mean, population standard deviation and median of each metric."""
    if not reports:
        raise EmptyInputError("no reports to summarize")
    out = {}
    for name in SUMMARY_METRICS:
        values = np.array([getattr(r, name) for r in reports], dtype=np.float64)
        out[name] = MetricSummary(mean=float(values.mean()), std=float(values.std()), median=float(np.median(values)))
    return out


def _with(config: ModelConfig, **updates) -> ModelConfig:
    return ModelConfig(**{**config.model_dump(), **updates})


def _check_seeds(seeds: Sequence[int]) -> List[int]:
    seeds = [int(s) for s in seeds]
    if not seeds:
        raise ContractError("need at least one seed")
    if len(set(seeds)) != len(seeds):
        raise ContractError(f"seeds must be distinct, got {seeds}")
    return seeds


def fit_seed(config: ModelConfig, dataset: MultimodalDataset, work_dir: PathLike, tag: str) -> HCMEN:
    """Train one model and reload its best-validation checkpoint."""
    path = Path(work_dir) / f"{tag}.ckpt"
    path.parent.mkdir(parents=True, exist_ok=True)
    result = train(config, dataset, path)
    return load_model(result.checkpoint_path)


@track_stage(name="robustness_sweep")
def robustness_sweep(
    config: ModelConfig,
    dataset: MultimodalDataset,
    work_dir: PathLike,
    seeds: Sequence[int],
    rates: Sequence[float] = DEFAULT_SWEEP_RATES,
    split: str = "test",
    workers: Optional[int] = None,
) -> List[SeedAggregate]:
    """Score one model per seed at every missing rate.

    Each seed trains at ``config.missing_rate`` and is evaluated at each of
    ``rates`` with its own seed driving the corruption. The result has one
    row per rate followed by an ``average`` row: every seed's metrics are
    first averaged over the rates, then summarized over the seeds.

    Raises:
        ContractError: No seeds, repeated seeds, no rates, or a rate outside ``[0, 1]``.
        EmptyInputError: ``split`` has no utterances.
    """
    seeds = _check_seeds(seeds)
    rates = [float(r) for r in rates]
    if not rates:
        raise ContractError("need at least one missing rate")
    if any(not 0.0 <= r <= 1.0 for r in rates):
        raise ContractError(f"missing rates must lie in [0, 1], got {rates}")
    utterances = dataset.split(split)
    if not utterances:
        raise EmptyInputError(f"split '{split}' has no utterances")

    per_rate: Dict[float, List[MetricsReport]] = {r: [] for r in rates}
    per_seed_average: List[MetricsReport] = []
    for seed in seeds:
        model = fit_seed(_with(config, seed=seed), dataset, work_dir, f"sweep_seed{seed}")
        reports = [evaluate_model(model, utterances, rate=r, seed=seed, workers=workers) for r in rates]
        for r, report in zip(rates, reports):
            per_rate[r].append(report)
        averaged = {name: float(np.mean([getattr(rep, name) for rep in reports])) for name in SUMMARY_METRICS}
        per_seed_average.append(MetricsReport(**averaged, n_samples=reports[0].n_samples))
        logger.info(f"Sweep seed {seed}: MAE {averaged['mae']:.4f} averaged over {len(rates)} rates")

    rows = [
        SeedAggregate(label=f"r={r:g}", missing_rate=r, seeds=seeds, metrics=summarize(per_rate[r]))
        for r in rates
    ]
    rows.append(SeedAggregate(label="average", seeds=seeds, metrics=summarize(per_seed_average)))
    return rows


@track_stage(name="ablation_study")
def ablation_study(
    config: ModelConfig,
    dataset: MultimodalDataset,
    work_dir: PathLike,
    seeds: Sequence[int],
    rate: float = DEFAULT_ABLATION_RATE,
    variants: Mapping[str, Mapping[str, bool]] = ABLATIONS,
    split: str = "test",
    workers: Optional[int] = None,
) -> List[SeedAggregate]:
    """Train the full model and each component-removed variant over the same seeds.

    Every variant trains and is evaluated at ``rate``. Rows carry the
    parameter count and, when a ``full`` variant is present, the difference
    between each variant's median MAE and the full model's.

    Raises:
        ContractError: No seeds, repeated seeds, a rate outside ``[0, 1]`` or no variants.
        EmptyInputError: ``split`` has no utterances.
    """
    seeds = _check_seeds(seeds)
    if not 0.0 <= rate <= 1.0:
        raise ContractError(f"missing rate must lie in [0, 1], got {rate}")
    if not variants:
        raise ContractError("need at least one variant")
    utterances = dataset.split(split)
    if not utterances:
        raise EmptyInputError(f"split '{split}' has no utterances")

    rows = []
    for label, flags in variants.items():
        toggles = {"disable_cnn": False, "disable_mamba": False, "disable_cmea": False, **flags}
        variant_config = _with(config, missing_rate=rate, **toggles)
        reports, size = [], None
        for seed in seeds:
            tag = f"ablation_{label.replace('/', '').replace(' ', '_')}_seed{seed}"
            model = fit_seed(_with(variant_config, seed=seed), dataset, work_dir, tag)
            size = model.num_parameters()
            reports.append(evaluate_model(model, utterances, rate=rate, seed=seed, workers=workers))
        row = SeedAggregate(label=label, missing_rate=rate, seeds=seeds, num_parameters=size, metrics=summarize(reports))
        logger.info(f"Ablation {label}: median MAE {row.metrics['mae'].median:.4f} over {len(seeds)} seeds")
        rows.append(row)

    reference = next((row for row in rows if row.label == "full"), None)
    if reference is not None:
        for row in rows:
            row.mae_delta = row.metrics["mae"].median - reference.metrics["mae"].median
    return rows


def write_summary_csv(rows: Sequence[SeedAggregate], path: PathLike) -> Path:
    """One CSV row per experiment cell with mean, std and median of each metric."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    header = ["label", "missing_rate", "n_seeds"]
    for name in SUMMARY_METRICS:
        header += [f"{name}_mean", f"{name}_std", f"{name}_median"]
    with open(path, "w", newline="", encoding="utf-8") as f:
        writer = csv.writer(f)
        writer.writerow(header)
        writer.writerows(row.csv_row(SUMMARY_METRICS) for row in rows)
    return path
