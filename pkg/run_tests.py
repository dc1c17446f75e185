#!/usr/bin/env python3
"""Test runner for the HCMEN package.

Usage:
    python run_tests.py [--package ssm] [--quick] [--coverage]
    python run_tests.py check       verify the numeric and test stacks
    python run_tests.py smoke       synth -> train -> eval through the CLI
    python run_tests.py packages    list test packages and their files
"""

import argparse
import importlib
import subprocess
import sys
import tempfile
from pathlib import Path

PACKAGES = ["tensor", "ssm", "pipeline", "cmea", "fusion", "model", "training", "cli", "utils"]

# package name -> import name
RUNTIME_STACK = {
    "numpy": "numpy",
    "scipy": "scipy",
    "scikit-learn": "sklearn",
    "pydantic": "pydantic",
    "pydantic-settings": "pydantic_settings",
    "loguru": "loguru",
}
TEST_STACK = {
    "pytest": "pytest",
    "pytest-timeout": "pytest_timeout",
    "pytest-cov": "pytest_cov",
    "pytest-xdist": "xdist",
    "hypothesis": "hypothesis",
    "faker": "faker",
}

SMOKE_CONFIG = '{"seq_len": 4, "d_model": 8, "d_state": 2, "n_fusion_blocks": 1, "batch_size": 8, "epochs": 2}'


def run_command(command, description, capture=True):
    """Run a command and report whether it succeeded."""
    print(f"\n{'='*60}")
    print(f"Running: {description}")
    print(f"Command: {' '.join(command)}")
    print(f"{'='*60}")

    try:
        result = subprocess.run(command, check=True, capture_output=capture, text=True)
        if capture:
            print(result.stdout)
            if result.stderr:
                print("STDERR:", result.stderr)
        return True
    except subprocess.CalledProcessError as e:
        print(f"ERROR: {description} failed with exit code {e.returncode}")
        if capture:
            print("STDOUT:", e.stdout)
            print("STDERR:", e.stderr)
        return False


def build_pytest_command(args):
    command = [sys.executable, "-m", "pytest"]

    if args.package == "all":
        command.append("tests/")
    else:
        test_path = Path("tests") / args.package
        if not test_path.exists():
            print(f"ERROR: Test directory {test_path} not found.")
            sys.exit(1)
        command.append(str(test_path))

    markers = []
    if args.quick:
        markers.append("not slow and not integration and not performance")
    if args.markers:
        markers.append(f"({args.markers})")
    if markers:
        command.extend(["-m", " and ".join(markers)])

    if args.coverage:
        command.extend(["--cov=app", "--cov-report=term-missing", "--cov-report=html:htmlcov"])
    if args.parallel:
        command.extend(["-n", str(args.parallel)])
    if args.failfast:
        command.append("-x")
    if args.lf:
        command.append("--lf")
    if args.seed is not None:
        command.append(f"--hypothesis-seed={args.seed}")
    command.extend(["--tb", args.tb])
    return command


def main():
    parser = argparse.ArgumentParser(description="Run tests for the HCMEN package")
    parser.add_argument(
        "--package",
        choices=PACKAGES + ["all"],
        default="all",
        help="Test package to run (default: all)"
    )
    parser.add_argument(
        "--quick",
        action="store_true",
        help="Skip slow, integration and performance tests"
    )
    parser.add_argument(
        "--markers",
        "-m",
        help="Extra marker expression (e.g. 'not slow')"
    )
    parser.add_argument(
        "--coverage",
        action="store_true",
        help="Report coverage of the app package"
    )
    parser.add_argument(
        "--parallel",
        "-n",
        type=int,
        help="Number of pytest-xdist workers"
    )
    parser.add_argument(
        "--seed",
        type=int,
        help="Fix the hypothesis seed"
    )
    parser.add_argument(
        "--failfast",
        "-x",
        action="store_true",
        help="Stop on first failure"
    )
    parser.add_argument(
        "--lf",
        action="store_true",
        help="Run only tests that failed in the last run"
    )
    parser.add_argument(
        "--tb",
        choices=["short", "long", "auto", "line", "native", "no"],
        default="short",
        help="Traceback print mode"
    )
    args = parser.parse_args()

    if not Path("tests").exists():
        print("ERROR: tests directory not found. Please run from project root.")
        sys.exit(1)

    if not run_command(build_pytest_command(args), f"Running tests for {args.package}", capture=False):
        print(f"\n❌ Some tests failed for {args.package}")
        sys.exit(1)

    print(f"\n✅ All tests passed for {args.package}!")
    if args.coverage:
        print("\n📊 Coverage report: htmlcov/index.html")


def list_packages():
    """Print each test package with its test files."""
    for package in PACKAGES:
        test_path = Path("tests") / package
        files = sorted(p.name for p in test_path.glob("test_*.py")) if test_path.exists() else []
        print(f"  {package}: {', '.join(files) if files else 'no tests'}")


def check_test_environment():
    """Check that the runtime and test dependencies import."""
    print("Checking test environment...")
    ok = True
    for label, stack in (("runtime", RUNTIME_STACK), ("test", TEST_STACK)):
        for package, module in stack.items():
            try:
                imported = importlib.import_module(module)
                version = getattr(imported, "__version__", "")
                print(f"✅ {package} {version}".rstrip())
            except ImportError:
                print(f"❌ {package} is not installed ({label} dependency)")
                ok = False

    try:
        importlib.import_module("prometheus_client")
        print("✅ prometheus-client (optional)")
    except ImportError:
        print("ℹ️  prometheus-client not installed; metrics export stays off")
    return ok


def run_smoke():
    """Generate a small dataset, train for two epochs and evaluate at three missing rates."""
    with tempfile.TemporaryDirectory() as tmp:
        root = Path(tmp)
        config = root / "config.json"
        config.write_text(SMOKE_CONFIG, encoding="utf-8")
        cli = [sys.executable, "-m", "app"]
        steps = [
            (cli + ["synth", "--out", str(root / "data"), "--n", "40", "--seed", "0"], "synth"),
            (cli + ["train", "--data", str(root / "data"), "--config", str(config),
                    "--out", str(root / "model.ckpt"), "--metrics", str(root / "metrics.csv")], "train"),
            (cli + ["eval", "--data", str(root / "data"), "--ckpt", str(root / "model.ckpt"),
                    "--missing-rate", "0,0.5,1", "--seed", "0"], "eval"),
        ]
        for command, description in steps:
            if not run_command(command, description):
                return False
    return True


if __name__ == "__main__":
    if len(sys.argv) > 1 and not sys.argv[1].startswith("-"):
        command = sys.argv[1]
        if command == "check":
            sys.exit(0 if check_test_environment() else 1)
        elif command == "packages":
            list_packages()
            sys.exit(0)
        elif command == "smoke":
            sys.exit(0 if run_smoke() else 1)
        print(f"Unknown command '{command}'. Expected check, packages or smoke.")
        sys.exit(1)

    main()
