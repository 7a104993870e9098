"""Shared fixtures for the lab test suite."""

import numpy as np
import pytest

from src import data
from src.run_config import RunConfig


@pytest.fixture
def rng():
    return np.random.default_rng(42)


@pytest.fixture
def blobs():
    """Four well-separated 8-d blobs with a 70/15/15 split."""
    gen = np.random.default_rng(7)
    ds = data.make_blobs(k=4, n_per_class=40, dim=8, center_spread=3.0, noise_sigma=0.1, rng=gen)
    return data.split(ds, 0.15, 0.15, gen)


@pytest.fixture
def tiny_config(tmp_path):
    """Seconds-scale blobs run writing into a temporary directory."""
    return RunConfig(
        dataset="blobs", blobs_k=3, blobs_n_per_class=20, blobs_dim=6, blobs_sigma=0.2,
        variant="gaussian", lam=0.5, hidden_sizes=[12, 6], epochs=3, batch_size=8, lr=5e-3,
        seeds=[0, 1], out_dir=str(tmp_path / "out"), kmeans_restarts=2,
    )
