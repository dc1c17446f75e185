"""Subcommand implementations. Each returns the process exit code."""

import argparse
import csv
import json
import sys
import time
from pathlib import Path
from typing import Any, Dict, List

import numpy as np
from loguru import logger
from pydantic import ValidationError

from app.cli.gradcheck import run_suite
from app.config import settings
from app.exceptions import EmptyInputError, UsageError
from app.model.schemas import MetricsReport, ModelConfig, SeedAggregate
from app.pipeline import SPLITS, load_dataset
from app.ssm import init_ssm_params, selective_scan
from app.tensor import ParamStore, Tensor, no_grad
from app.training import (
    ablation_study,
    evaluate_model,
    generate_synthetic,
    load_model,
    robustness_sweep,
    train,
    write_summary_csv,
)
from app.training.experiments import DEFAULT_SWEEP_RATES
from app.training.synthetic import DEFAULT_DIMS, DEFAULT_LENGTHS
from app.utils.monitoring import track_stage

REPORT_FIELDS = ["missing_rate", "acc7", "acc5", "acc2_has0", "acc2_non0", "f1_has0", "f1_non0", "mae", "corr"]


def print_config(config: Dict[str, Any]) -> None:
    """Echo the resolved configuration of a run as one JSON document."""
    print(json.dumps(config, sort_keys=True))


def load_config(path: str, overrides: Dict[str, Any]) -> ModelConfig:
    """Read a JSON config file and apply command-line overrides.

    Raises:
        UsageError: Unreadable file, invalid JSON, or an invalid field (named).
    """
    try:
        with open(path, encoding="utf-8") as f:
            data = json.load(f)
    except (OSError, json.JSONDecodeError) as e:
        raise UsageError(f"cannot read config {path}: {e}") from e
    if not isinstance(data, dict):
        raise UsageError(f"config {path} must hold a JSON object")
    data.update({k: v for k, v in overrides.items() if v is not None})
    try:
        return ModelConfig(**data)
    except ValidationError as e:
        fields = ", ".join(".".join(str(p) for p in err["loc"]) or "config" for err in e.errors())
        raise UsageError(f"invalid config field(s) {fields}: {e}") from e


def run_synth(args: argparse.Namespace) -> int:
    out = Path(args.out)
    if out.exists() and (not out.is_dir() or any(out.iterdir())) and not args.force:
        raise UsageError(f"{out} exists and is not empty; pass --force to write into it")
    print_config({
        "command": "synth", "out": str(out), "n": args.n, "seed": args.seed, "noise": args.noise,
        "lengths": list(DEFAULT_LENGTHS), "dims": list(DEFAULT_DIMS),
    })
    dataset = generate_synthetic(out, args.n, noise=args.noise, seed=args.seed)
    for split in SPLITS:
        print(f"{split}: {len(dataset.split(split))}")
    return 0


def run_train(args: argparse.Namespace) -> int:
    overrides = {"missing_rate": args.missing_rate, "epochs": args.epochs}
    for toggle in ("disable_cnn", "disable_mamba", "disable_cmea"):
        if getattr(args, toggle):
            overrides[toggle] = True
    config = load_config(args.config, overrides)
    print_config(config.model_dump())

    dataset = load_dataset(args.data)
    result = train(config, dataset, args.out, metrics_path=args.metrics)
    print(f"best_epoch: {result.best_epoch}")
    print(f"best_val_mae: {result.best_val_mae:.6f}")
    print(f"parameters: {result.num_parameters}")
    print(f"checkpoint: {result.checkpoint_path}")
    return 0


def _report_row(rate: float, report: MetricsReport) -> List[str]:
    values = report.model_dump()
    return [repr(rate)] + [repr(float(values[name])) for name in REPORT_FIELDS[1:]]


def run_eval(args: argparse.Namespace) -> int:
    model = load_model(args.ckpt)
    print_config(model.config.model_dump())
    dataset = load_dataset(args.data)
    utterances = dataset.split(args.split)
    if not utterances:
        raise EmptyInputError(f"split '{args.split}' has no utterances")

    rows = []
    for rate in args.missing_rate:
        report = evaluate_model(model, utterances, rate=rate, seed=args.seed, workers=args.workers)
        print(json.dumps({"missing_rate": rate, **report.model_dump()}, sort_keys=True))
        rows.append(_report_row(rate, report))

    if args.report:
        Path(args.report).parent.mkdir(parents=True, exist_ok=True)
        with open(args.report, "w", newline="", encoding="utf-8") as f:
            writer = csv.writer(f)
            writer.writerow(REPORT_FIELDS)
            writer.writerows(rows)
    return 0


def _print_rows(rows: List[SeedAggregate]) -> None:
    for row in rows:
        print(json.dumps(row.model_dump(), sort_keys=True))


def run_sweep(args: argparse.Namespace) -> int:
    config = load_config(args.config, {"missing_rate": args.train_missing_rate, "epochs": args.epochs})
    rates = args.missing_rate or list(DEFAULT_SWEEP_RATES)
    print_config({**config.model_dump(), "command": "sweep", "seeds": args.seeds, "rates": rates})
    dataset = load_dataset(args.data)
    rows = robustness_sweep(config, dataset, args.out_dir, args.seeds, rates=rates, split=args.split, workers=args.workers)
    _print_rows(rows)
    if args.report:
        write_summary_csv(rows, args.report)
    return 0


def run_ablate(args: argparse.Namespace) -> int:
    config = load_config(args.config, {"epochs": args.epochs})
    print_config({**config.model_dump(), "command": "ablate", "seeds": args.seeds, "missing_rate": args.missing_rate})
    dataset = load_dataset(args.data)
    rows = ablation_study(
        config, dataset, args.out_dir, args.seeds, rate=args.missing_rate, split=args.split, workers=args.workers
    )
    _print_rows(rows)
    if args.report:
        write_summary_csv(rows, args.report)
    return 0


def gradcheck_tolerance(component: str) -> float:
    """Per-operator checks use the strict tolerance, the full objective the model one."""
    if component == "end_to_end":
        return settings.GRADCHECK_MODEL_TOLERANCE
    return settings.GRADCHECK_TOLERANCE


def run_gradcheck(args: argparse.Namespace) -> int:
    print_config({
        "command": "gradcheck", "seed": args.seed,
        "eps": settings.GRADCHECK_EPS, "samples": settings.GRADCHECK_SAMPLES,
        "floor": settings.GRADCHECK_FLOOR, "tolerance": settings.GRADCHECK_TOLERANCE,
        "model_tolerance": settings.GRADCHECK_MODEL_TOLERANCE,
    })
    results = run_suite(
        args.seed,
        eps=settings.GRADCHECK_EPS,
        samples=settings.GRADCHECK_SAMPLES,
        floor=settings.GRADCHECK_FLOOR,
        perturb=args.perturb,
    )
    offenders = []
    for component, errors in results.items():
        worst_name = max(errors, key=errors.get)
        print(f"{component}: worst {worst_name} max_rel_err={errors[worst_name]:.3e}")
        tolerance = gradcheck_tolerance(component)
        offenders += [f"{component}/{name}" for name, err in errors.items() if not err < tolerance]
    if offenders:
        print(f"FAILED ({len(offenders)} over tolerance): {', '.join(offenders)}")
        return 2
    print("OK")
    return 0


@track_stage(name="bench")
def time_scan(length: int, trials: int, d_inner: int, d_state: int, seed: int = 0) -> float:
    """Median forward time of one selective scan in milliseconds."""
    rng = np.random.default_rng(seed)
    store = ParamStore()
    params = init_ssm_params(store, "bench", d_inner, d_state, rng)
    x = Tensor(rng.normal(size=(length, d_inner)))
    timings = []
    with no_grad():
        for _ in range(trials):
            start = time.perf_counter()
            selective_scan(params, x)
            timings.append((time.perf_counter() - start) * 1000.0)
    return float(np.median(timings))


def run_bench(args: argparse.Namespace) -> int:
    print_config({
        "command": "bench", "lengths": args.lengths, "trials": args.trials,
        "d_inner": settings.BENCH_D_INNER, "d_state": settings.BENCH_D_STATE,
    })
    medians = [time_scan(n, args.trials, settings.BENCH_D_INNER, settings.BENCH_D_STATE) for n in args.lengths]

    rows = [["length", "median_ms"]] + [[str(n), f"{ms:.6f}"] for n, ms in zip(args.lengths, medians)]
    writer = csv.writer(sys.stdout)
    writer.writerows(rows)
    if args.out:
        Path(args.out).parent.mkdir(parents=True, exist_ok=True)
        with open(args.out, "w", newline="", encoding="utf-8") as f:
            csv.writer(f).writerows(rows)

    if len(args.lengths) >= 2:
        slope = float(np.polyfit(np.log(args.lengths), np.log(medians), 1)[0])
        print(f"loglog_slope: {slope:.4f}")
    else:
        logger.warning("need at least two lengths to fit a scaling slope")
    return 0


COMMANDS = {
    "synth": run_synth,
    "train": run_train,
    "eval": run_eval,
    "sweep": run_sweep,
    "ablate": run_ablate,
    "gradcheck": run_gradcheck,
    "bench": run_bench,
}
