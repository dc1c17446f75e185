"""Tests for the ``hcmen`` command line."""
import csv
import json

import numpy as np
import pytest

from app.main import EXIT_OK, EXIT_RUNTIME, EXIT_USAGE, main

TINY_MODEL = {
    "seq_len": 4, "d_model": 8, "d_state": 2, "n_fusion_blocks": 1,
    "mamba_conv_width": 3, "batch_size": 4, "epochs": 1,
}


@pytest.fixture
def config_file(tmp_path):
    path = tmp_path / "config.json"
    path.write_text(json.dumps(TINY_MODEL))
    return path


@pytest.fixture
def checkpoint(dataset_dir, config_file, tmp_path):
    path = tmp_path / "model.ckpt"
    code = main(["train", "--data", str(dataset_dir), "--config", str(config_file), "--out", str(path)])
    assert code == EXIT_OK
    return path


def _json_lines(text):
    return [json.loads(line) for line in text.splitlines() if line.startswith("{")]


class TestParsing:
    """Test usage errors."""

    def test_missing_subcommand(self):
        """Test a bare invocation is a usage error."""
        assert main([]) == EXIT_USAGE

    def test_non_positive_count(self, tmp_path):
        """Test --n 0 is rejected before any work."""
        assert main(["synth", "--out", str(tmp_path / "d"), "--n", "0", "--seed", "1"]) == EXIT_USAGE
        assert not (tmp_path / "d").exists()

    def test_rate_out_of_range(self, tmp_path):
        """Test missing rates above 1 are usage errors."""
        code = main(["eval", "--data", str(tmp_path), "--ckpt", "x", "--missing-rate", "0.2,1.5", "--seed", "0"])
        assert code == EXIT_USAGE

    def test_lengths_must_ascend(self):
        """Test benchmark lengths must be strictly ascending."""
        assert main(["bench", "--lengths", "64,32", "--trials", "1"]) == EXIT_USAGE

    def test_exclusive_ablations(self, tmp_path):
        """Test only one ablation flag may be given."""
        code = main([
            "train", "--data", "d", "--config", "c", "--out", "o", "--disable-cnn", "--disable-mamba",
        ])
        assert code == EXIT_USAGE

    def test_version(self, capsys):
        """Test --version exits cleanly."""
        assert main(["--version"]) == EXIT_OK
        assert "hcmen" in capsys.readouterr().out


class TestSynth:
    """Test dataset generation."""

    def test_writes_dataset(self, tmp_path, capsys):
        """Test the config echo and split counts."""
        out = tmp_path / "data"
        assert main(["synth", "--out", str(out), "--n", "10", "--seed", "2"]) == EXIT_OK
        stdout = capsys.readouterr().out
        assert _json_lines(stdout)[0]["n"] == 10
        assert "train: 7" in stdout
        assert (out / "manifest.jsonl").is_file()

    def test_refuses_non_empty_directory(self, dataset_dir):
        """Test an existing dataset is not overwritten without --force."""
        assert main(["synth", "--out", str(dataset_dir), "--n", "5", "--seed", "0"]) == EXIT_USAGE
        assert main(["synth", "--out", str(dataset_dir), "--n", "5", "--seed", "0", "--force"]) == EXIT_OK


@pytest.mark.integration
class TestTrainAndEval:
    """Test training and evaluation end to end."""

    def test_train(self, dataset_dir, config_file, tmp_path, capsys):
        """Test train prints its config and writes checkpoint and metrics."""
        ckpt, metrics = tmp_path / "m.ckpt", tmp_path / "metrics.csv"
        code = main([
            "train", "--data", str(dataset_dir), "--config", str(config_file),
            "--out", str(ckpt), "--metrics", str(metrics), "--missing-rate", "0.2", "--disable-cmea",
        ])
        assert code == EXIT_OK
        echoed = _json_lines(capsys.readouterr().out)[0]
        assert echoed["missing_rate"] == 0.2
        assert echoed["disable_cmea"] is True
        assert ckpt.is_file()
        with open(metrics, newline="") as f:
            assert len(list(csv.reader(f))) == 2

    def test_each_ablation_has_fewer_parameters(self, dataset_dir, config_file, tmp_path, capsys):
        """Test --disable-cnn, --disable-mamba and --disable-cmea each train a strictly smaller model."""
        counts = {}
        for flag in (None, "--disable-cnn", "--disable-mamba", "--disable-cmea"):
            argv = ["train", "--data", str(dataset_dir), "--config", str(config_file), "--out", str(tmp_path / f"{flag}.ckpt")]
            capsys.readouterr()
            assert main(argv + ([flag] if flag else [])) == EXIT_OK
            line = next(l for l in capsys.readouterr().out.splitlines() if l.startswith("parameters: "))
            counts[flag] = int(line.split(": ")[1])
        for flag in ("--disable-cnn", "--disable-mamba", "--disable-cmea"):
            assert 0 < counts[flag] < counts[None]

    def test_invalid_config_field(self, dataset_dir, tmp_path, capsys):
        """Test a bad config value is a usage error naming the field."""
        path = tmp_path / "bad.json"
        path.write_text(json.dumps({**TINY_MODEL, "d_model": 0}))
        code = main(["train", "--data", str(dataset_dir), "--config", str(path), "--out", str(tmp_path / "m")])
        assert code == EXIT_USAGE
        assert "d_model" in capsys.readouterr().err

    def test_missing_dataset(self, config_file, tmp_path):
        """Test an absent dataset root is a runtime error."""
        code = main(["train", "--data", str(tmp_path / "nope"), "--config", str(config_file), "--out", str(tmp_path / "m")])
        assert code == EXIT_RUNTIME

    def test_eval_reports_each_rate(self, dataset_dir, checkpoint, tmp_path, capsys):
        """Test one JSON report and one CSV row per missing rate."""
        capsys.readouterr()
        report = tmp_path / "report.csv"
        code = main([
            "eval", "--data", str(dataset_dir), "--ckpt", str(checkpoint),
            "--missing-rate", "0,0.5,1", "--seed", "1", "--report", str(report),
        ])
        assert code == EXIT_OK
        reports = [r for r in _json_lines(capsys.readouterr().out) if "missing_rate" in r and "mae" in r]
        assert [r["missing_rate"] for r in reports] == [0.0, 0.5, 1.0]
        with open(report, newline="") as f:
            rows = list(csv.reader(f))
        assert rows[0][0] == "missing_rate"
        assert len(rows) == 4

    def test_eval_is_reproducible(self, dataset_dir, checkpoint, capsys):
        """Test the same seed prints the same report."""
        args = ["eval", "--data", str(dataset_dir), "--ckpt", str(checkpoint), "--missing-rate", "0.3", "--seed", "4"]
        capsys.readouterr()
        main(args)
        first = capsys.readouterr().out
        main(args + ["--workers", "2"])
        assert capsys.readouterr().out == first

    def test_eval_bad_checkpoint(self, dataset_dir, tmp_path):
        """Test a corrupt checkpoint is a runtime error."""
        bogus = tmp_path / "bogus.ckpt"
        bogus.write_bytes(b"garbage")
        code = main(["eval", "--data", str(dataset_dir), "--ckpt", str(bogus), "--missing-rate", "0", "--seed", "0"])
        assert code == EXIT_RUNTIME

    @pytest.mark.parametrize("cut", [3, 4])
    def test_eval_truncated_checkpoint(self, dataset_dir, checkpoint, cut):
        """Test a checkpoint cut short is a runtime error, not a crash."""
        checkpoint.write_bytes(checkpoint.read_bytes()[:-cut])
        code = main(["eval", "--data", str(dataset_dir), "--ckpt", str(checkpoint), "--missing-rate", "0", "--seed", "0"])
        assert code == EXIT_RUNTIME

    def test_unexpected_value_error_is_runtime(self, monkeypatch):
        """Test a stray ValueError from a command still maps to the runtime exit code."""
        from app import cli

        def broken(args):
            raise ValueError("buffer size must be a multiple of element size")

        monkeypatch.setitem(cli.COMMANDS, "bench", broken)
        assert main(["bench", "--lengths", "8", "--trials", "1"]) == EXIT_RUNTIME

    def test_sweep(self, dataset_dir, config_file, tmp_path, capsys):
        """Test sweep prints one summary per rate plus the average and writes the CSV."""
        report = tmp_path / "sweep.csv"
        capsys.readouterr()
        code = main([
            "sweep", "--data", str(dataset_dir), "--config", str(config_file), "--out-dir", str(tmp_path / "runs"),
            "--seeds", "0,1", "--missing-rate", "0,0.5", "--report", str(report),
        ])
        assert code == EXIT_OK
        rows = [r for r in _json_lines(capsys.readouterr().out) if "metrics" in r]
        assert [r["label"] for r in rows] == ["r=0", "r=0.5", "average"]
        assert rows[0]["seeds"] == [0, 1]
        with open(report, newline="") as f:
            assert len(list(csv.reader(f))) == 4

    def test_ablate(self, dataset_dir, config_file, tmp_path, capsys):
        """Test ablate reports the full model and the three removals."""
        capsys.readouterr()
        code = main([
            "ablate", "--data", str(dataset_dir), "--config", str(config_file), "--out-dir", str(tmp_path / "runs"),
            "--seeds", "0", "--missing-rate", "0.5",
        ])
        assert code == EXIT_OK
        rows = [r for r in _json_lines(capsys.readouterr().out) if "metrics" in r]
        assert [r["label"] for r in rows] == ["full", "w/o CNN", "w/o Mamba", "w/o CMEA"]
        assert all(r["num_parameters"] < rows[0]["num_parameters"] for r in rows[1:])

    @pytest.mark.parametrize("seeds", ["0,0", "a,b", ","])
    def test_bad_seed_list(self, dataset_dir, config_file, tmp_path, seeds):
        """Test repeated or non-integer seeds are usage errors."""
        code = main([
            "sweep", "--data", str(dataset_dir), "--config", str(config_file), "--out-dir", str(tmp_path),
            "--seeds", seeds,
        ])
        assert code == EXIT_USAGE


@pytest.mark.performance
class TestBench:
    """Test the scan benchmark."""

    def test_csv_and_slope(self, tmp_path, capsys):
        """Test a CSV row per length and the fitted slope."""
        out = tmp_path / "bench.csv"
        assert main(["bench", "--lengths", "8,16", "--trials", "1", "--out", str(out)]) == EXIT_OK
        stdout = capsys.readouterr().out
        assert "length,median_ms" in stdout
        assert "loglog_slope:" in stdout
        with open(out, newline="") as f:
            rows = list(csv.reader(f))
        assert [row[0] for row in rows] == ["length", "8", "16"]

    @pytest.mark.timeout(1200)
    def test_linear_scaling(self):
        """Test the scan time grows linearly from 1024 to 8192 steps."""
        from app.cli.commands import time_scan
        from app.config import settings

        lengths = [1024, 2048, 4096, 8192]
        medians = [time_scan(n, 3, settings.BENCH_D_INNER, settings.BENCH_D_STATE) for n in lengths]
        slope = float(np.polyfit(np.log(lengths), np.log(medians), 1)[0])
        assert 0.8 <= slope <= 1.3
        assert medians[-1] / medians[-2] < 2.6


@pytest.mark.slow
class TestGradcheck:
    """Test the finite-difference suite command."""

    def test_passes(self, capsys):
        """Test every component is within tolerance and reported."""
        assert main(["gradcheck", "--seed", "0"]) == EXIT_OK
        out = capsys.readouterr().out
        assert out.rstrip().endswith("OK")
        for component in ("tensor_core", "ssm_mamba", "modality_pipeline", "cmea", "fusion_head", "end_to_end"):
            assert f"{component}: worst " in out

    def test_strict_tolerance_for_operators(self):
        """Test operators are held to the strict tolerance and the full objective to the model one."""
        from app.cli.commands import gradcheck_tolerance
        from app.config import settings

        assert gradcheck_tolerance("ssm_mamba") == settings.GRADCHECK_TOLERANCE == 1e-5
        assert gradcheck_tolerance("end_to_end") == settings.GRADCHECK_MODEL_TOLERANCE == 1e-4

    def test_perturbed_gradients_fail(self, capsys):
        """Test a biased gradient is reported as a failure."""
        assert main(["gradcheck", "--seed", "0", "--perturb", "0.5"]) == EXIT_RUNTIME
        assert "FAILED" in capsys.readouterr().out
