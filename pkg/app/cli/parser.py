"""Argument parsing for the ``hcmen`` command."""

import argparse
from typing import List

from app.config import settings
from app.exceptions import UsageError


class CliArgumentParser(argparse.ArgumentParser):
    """ArgumentParser that raises ``UsageError`` instead of exiting with status 2."""

    def error(self, message):
        raise UsageError(f"{self.prog}: {message}")


def positive_int(value: str) -> int:
    try:
        number = int(value)
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected an integer, got '{value}'")
    if number < 1:
        raise argparse.ArgumentTypeError(f"expected a positive integer, got {number}")
    return number


def non_negative_float(value: str) -> float:
    try:
        number = float(value)
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected a number, got '{value}'")
    if not number >= 0:
        raise argparse.ArgumentTypeError(f"expected a non-negative number, got {value}")
    return number


def rate(value: str) -> float:
    number = non_negative_float(value)
    if number > 1:
        raise argparse.ArgumentTypeError(f"missing rate must lie in [0, 1], got {number}")
    return number


def rate_list(value: str) -> List[float]:
    return [rate(part.strip()) for part in value.split(",") if part.strip()] or _empty(value)


def length_list(value: str) -> List[int]:
    lengths = [positive_int(part.strip()) for part in value.split(",") if part.strip()] or _empty(value)
    if any(b <= a for a, b in zip(lengths, lengths[1:])):
        raise argparse.ArgumentTypeError(f"lengths must be strictly ascending, got {value}")
    return lengths


def seed_list(value: str) -> List[int]:
    try:
        seeds = [int(part.strip()) for part in value.split(",") if part.strip()] or _empty(value)
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated integers, got '{value}'")
    if len(set(seeds)) != len(seeds):
        raise argparse.ArgumentTypeError(f"seeds must be distinct, got {value}")
    return seeds


def _empty(value: str):
    raise argparse.ArgumentTypeError(f"expected a comma-separated list, got '{value}'")


def build_parser() -> CliArgumentParser:
    parser = CliArgumentParser(prog="hcmen", description=settings.DESCRIPTION)
    parser.add_argument("--log-level", default=None, help=f"Log level (default: {settings.LOG_LEVEL})")
    parser.add_argument("--version", action="version", version=f"%(prog)s {settings.VERSION}")
    commands = parser.add_subparsers(dest="command", required=True, parser_class=CliArgumentParser)

    synth = commands.add_parser("synth", help="Write a synthetic multimodal dataset")
    synth.add_argument("--out", required=True, help="Dataset root to create")
    synth.add_argument("--n", required=True, type=positive_int, help="Number of utterances")
    synth.add_argument("--seed", required=True, type=int)
    synth.add_argument("--noise", type=non_negative_float, default=0.1,
                       help="Text noise level; vision gets 2x and audio 3x (default: 0.1)")
    synth.add_argument("--force", action="store_true", help="Write into a non-empty directory")

    train = commands.add_parser("train", help="Train a model and keep the best checkpoint")
    train.add_argument("--data", required=True, help="Dataset root")
    train.add_argument("--config", required=True, help="JSON file with ModelConfig fields")
    train.add_argument("--out", required=True, help="Checkpoint path")
    train.add_argument("--metrics", default=None, help="Per-epoch metrics CSV path")
    train.add_argument("--missing-rate", type=rate, default=None)
    train.add_argument("--epochs", type=positive_int, default=None)
    ablation = train.add_mutually_exclusive_group()
    ablation.add_argument("--disable-cnn", action="store_true")
    ablation.add_argument("--disable-mamba", action="store_true")
    ablation.add_argument("--disable-cmea", action="store_true")

    evaluate = commands.add_parser("eval", help="Score a checkpoint under missing-modality corruption")
    evaluate.add_argument("--data", required=True, help="Dataset root")
    evaluate.add_argument("--ckpt", required=True, help="Checkpoint path")
    evaluate.add_argument("--missing-rate", required=True, type=rate_list, help="Rate or comma-separated rates")
    evaluate.add_argument("--seed", required=True, type=int)
    evaluate.add_argument("--split", default="test", choices=["train", "valid", "test"])
    evaluate.add_argument("--report", default=None, help="CSV report path, one row per rate")
    evaluate.add_argument("--workers", type=positive_int, default=None)

    sweep = commands.add_parser("sweep", help="Train one model per seed and score it across missing rates")
    sweep.add_argument("--data", required=True, help="Dataset root")
    sweep.add_argument("--config", required=True, help="JSON file with ModelConfig fields")
    sweep.add_argument("--out-dir", required=True, help="Directory for the per-seed checkpoints")
    sweep.add_argument("--seeds", required=True, type=seed_list, help="Comma-separated training seeds")
    sweep.add_argument("--missing-rate", type=rate_list, default=None,
                       help="Evaluation rates (default: 0,0.1,...,0.9)")
    sweep.add_argument("--train-missing-rate", type=rate, default=None)
    sweep.add_argument("--epochs", type=positive_int, default=None)
    sweep.add_argument("--split", default="test", choices=["train", "valid", "test"])
    sweep.add_argument("--report", default=None, help="CSV summary path")
    sweep.add_argument("--workers", type=positive_int, default=None)

    ablate = commands.add_parser("ablate", help="Compare the full model against each component removed")
    ablate.add_argument("--data", required=True, help="Dataset root")
    ablate.add_argument("--config", required=True, help="JSON file with ModelConfig fields")
    ablate.add_argument("--out-dir", required=True, help="Directory for the per-variant checkpoints")
    ablate.add_argument("--seeds", required=True, type=seed_list, help="Comma-separated training seeds")
    ablate.add_argument("--missing-rate", type=rate, default=0.5, help="Train and test rate (default: 0.5)")
    ablate.add_argument("--epochs", type=positive_int, default=None)
    ablate.add_argument("--split", default="test", choices=["train", "valid", "test"])
    ablate.add_argument("--report", default=None, help="CSV summary path")
    ablate.add_argument("--workers", type=positive_int, default=None)

    gradcheck = commands.add_parser("gradcheck", help="Finite-difference check of every analytic gradient")
    gradcheck.add_argument("--seed", required=True, type=int)
    gradcheck.add_argument("--perturb", type=float, default=0.0, help=argparse.SUPPRESS)

    bench = commands.add_parser("bench", help="Time the selective scan against sequence length")
    bench.add_argument("--lengths", required=True, type=length_list, help="Ascending comma-separated lengths")
    bench.add_argument("--trials", required=True, type=positive_int)
    bench.add_argument("--out", default=None, help="CSV output path")

    return parser
