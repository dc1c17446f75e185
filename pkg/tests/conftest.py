"""Pytest configuration and shared fixtures."""
import numpy as np
import pytest
from faker import Faker

from app.model.schemas import ModelConfig
from app.pipeline import collate
from app.tensor import use_float64
from app.training.synthetic import generate_synthetic


TINY_LENGTHS = (6, 7, 8)
TINY_DIMS = (3, 4, 2)


@pytest.fixture
def rng() -> np.random.Generator:
    """Seeded generator for test inputs."""
    return np.random.default_rng(1234)


@pytest.fixture
def faker() -> Faker:
    """Seeded Faker instance."""
    fake = Faker()
    fake.seed_instance(1234)
    return fake


@pytest.fixture
def float64():
    """Run the test with double-precision tensors."""
    with use_float64():
        yield


@pytest.fixture
def tiny_config() -> ModelConfig:
    """Desk-scale configuration used across model tests."""
    return ModelConfig(
        seq_len=4,
        d_model=8,
        d_state=2,
        n_fusion_blocks=1,
        mamba_conv_width=3,
        batch_size=4,
        epochs=1,
    )


@pytest.fixture
def tiny_dataset():
    """Small in-memory synthetic dataset."""
    return generate_synthetic(None, n=12, lengths=TINY_LENGTHS, dims=TINY_DIMS, noise=0.1, seed=0)


@pytest.fixture
def tiny_batch(tiny_dataset):
    """First four utterances collated into one batch."""
    return collate(tiny_dataset.utterances[:4])


@pytest.fixture
def dataset_dir(tmp_path):
    """Synthetic dataset written to disk."""
    root = tmp_path / "data"
    generate_synthetic(root, n=20, lengths=TINY_LENGTHS, dims=TINY_DIMS, noise=0.1, seed=3)
    return root
