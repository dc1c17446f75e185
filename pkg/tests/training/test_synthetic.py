"""Tests for synthetic data and the closed-form baselines."""
import numpy as np
import pytest

from app.exceptions import ContractError, EmptyInputError
from app.pipeline import MODALITIES, load_dataset
from app.training import generate_synthetic, mean_baseline_mae, ridge_baseline
from app.training.synthetic import split_counts


class TestGenerateSynthetic:
    """Test the latent-sentiment generator."""

    def test_split_counts(self):
        """Test 70/10/20 splits."""
        assert split_counts(100) == (70, 10, 20)
        assert sum(split_counts(7)) == 7

    def test_seeded(self):
        """Test the same seed reproduces the data."""
        first = generate_synthetic(None, n=10, seed=4)
        second = generate_synthetic(None, n=10, seed=4)
        for a, b in zip(first.utterances, second.utterances):
            assert a.label == b.label
            np.testing.assert_array_equal(a.features["audio"], b.features["audio"])

    def test_same_seed_writes_identical_bytes(self, tmp_path):
        """Test two runs with one seed produce byte-identical files."""
        generate_synthetic(tmp_path / "first", n=12, lengths=(4, 5, 6), dims=(2, 3, 2), seed=9)
        generate_synthetic(tmp_path / "second", n=12, lengths=(4, 5, 6), dims=(2, 3, 2), seed=9)
        first = sorted(p.relative_to(tmp_path / "first") for p in (tmp_path / "first").rglob("*") if p.is_file())
        second = sorted(p.relative_to(tmp_path / "second") for p in (tmp_path / "second").rglob("*") if p.is_file())
        assert first == second
        assert len(first) == 1 + 3 * 12
        for relative in first:
            assert (tmp_path / "first" / relative).read_bytes() == (tmp_path / "second" / relative).read_bytes()

    def test_different_seed_changes_data(self):
        """Test the seed feeds the generator."""
        first = generate_synthetic(None, n=4, seed=0).utterances
        second = generate_synthetic(None, n=4, seed=1).utterances
        assert [u.label for u in first] != [u.label for u in second]

    def test_shapes_and_ranges(self):
        """Test lengths lie in [ceil(T/2), T], widths match and labels lie in [-3, 3]."""
        dataset = generate_synthetic(None, n=30, lengths=(10, 15, 20), dims=(4, 5, 6), seed=1)
        assert dataset.dims == {"text": 4, "vision": 5, "audio": 6}
        for utterance in dataset.utterances:
            assert -3.0 <= utterance.label <= 3.0
            for modality, max_len in zip(MODALITIES, (10, 15, 20)):
                assert -(-max_len // 2) <= utterance.length(modality) <= max_len

    def test_noise_free_text_mean_is_label(self):
        """Test the first text feature averages to the label without noise."""
        dataset = generate_synthetic(None, n=8, noise=0.0, seed=2)
        for utterance in dataset.utterances:
            assert utterance.features["text"][:, 0].mean() == pytest.approx(utterance.label, abs=1e-9)

    def test_writes_loadable_dataset(self, tmp_path):
        """Test an output directory holds a dataset load_dataset accepts."""
        generate_synthetic(tmp_path, n=6, lengths=(4, 5, 6), dims=(2, 2, 2), seed=0)
        assert len(load_dataset(tmp_path)) == 6

    def test_ids(self):
        """Test utterance ids are zero padded."""
        assert generate_synthetic(None, n=2).utterances[1].id == "utt00001"

    @pytest.mark.parametrize("kwargs", [{"n": 0}, {"n": 5, "dims": (0, 2, 2)}, {"n": 5, "noise": -1.0}])
    def test_invalid_arguments(self, kwargs):
        """Test counts, widths and noise levels are validated."""
        with pytest.raises(ContractError):
            generate_synthetic(None, **kwargs)


class TestBaselines:
    """Test the reference baselines."""

    def test_ridge_recovers_sentiment(self):
        """Test ridge on averaged text features is far better than the mean."""
        dataset = generate_synthetic(None, n=200, seed=0)
        train, test = dataset.split("train"), dataset.split("test")
        preds, mae = ridge_baseline(train, test)
        assert preds.shape == (len(test),)
        assert mae < 0.3
        assert mae < mean_baseline_mae(train, test)

    def test_empty_split(self, tiny_dataset):
        """Test empty inputs are rejected."""
        with pytest.raises(EmptyInputError):
            ridge_baseline([], tiny_dataset.utterances)
        with pytest.raises(EmptyInputError):
            mean_baseline_mae(tiny_dataset.utterances, [])
