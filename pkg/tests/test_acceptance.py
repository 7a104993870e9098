"""
Desk-scale experiments: MNIST accuracy and latent clusterability, and the
lambda sweep on blobs. Marked slow; the MNIST tests also need the IDX files
under DATA_DIR/mnist.
"""

import os

import numpy as np
import pytest

import config
from src import data, pipelines
from src.clusterlab.evaluation import evaluate_latents
from src.linalg import make_rng
from src.run_config import RunConfig

MNIST_DIR = os.path.join(config.DATA_DIR, "mnist")
HAS_MNIST = all(
    os.path.exists(os.path.join(MNIST_DIR, name)) or os.path.exists(os.path.join(MNIST_DIR, name + ".gz"))
    for name in data.IDX_FILES.values()
)
needs_mnist = pytest.mark.skipif(not HAS_MNIST, reason=f"MNIST IDX files not found in {MNIST_DIR}")

DESK = dict(dataset="mnist", data_dir=config.DATA_DIR, train_subset=10_000, hidden_sizes=[128, 128],
            batch_size=128, lr=1e-4, epochs=20, data_seed=0)


@pytest.fixture(scope="module")
def mnist():
    return RunConfig(**DESK).load_dataset()


def _desk_run(dataset, variant, seed):
    return pipelines.run_seed(RunConfig(variant=variant, **DESK), dataset, seed)


@pytest.mark.slow
@needs_mnist
class TestMnistDeskScale:

    @pytest.mark.parametrize("variant", ["cce", "gaussian"])
    def test_accuracy(self, mnist, variant):
        """10k-sample subset, 20 epochs: at least 93% test accuracy."""
        assert _desk_run(mnist, variant, seed=0).test_accuracy >= 0.93

    def test_clusterability_direction(self, mnist):
        """COREL latents cluster better than CCE latents under k-means."""
        x_test, y_test = mnist.subset("test")
        scores = {}
        for variant in ("cce", "cosine", "gaussian"):
            accs, sils = [], []
            for seed in (0, 1, 2):
                model = _desk_run(mnist, variant, seed).best_model
                km, _ = evaluate_latents(model.latents(x_test), y_test, 10, make_rng(seed))
                accs.append(km.aligned_accuracy)
                sils.append(km.silhouette)
            scores[variant] = (np.mean(accs), np.mean(sils))

        assert scores["cosine"][0] >= scores["cce"][0] + 0.05
        assert scores["gaussian"][0] >= scores["cce"][0] + 0.05
        assert scores["cosine"][1] >= scores["cce"][1] + 0.2


@pytest.mark.slow
class TestLambdaSweep:

    def test_small_lambda_degrades(self, tmp_path):
        """Validation accuracy at lambda -> 0+ falls below the best lambda."""
        cfg = RunConfig(dataset="blobs", blobs_k=4, blobs_dim=16, blobs_n_per_class=150,
                        blobs_spread=2.0, blobs_sigma=1.0, variant="gaussian",
                        hidden_sizes=[32, 16], epochs=20, batch_size=32, lr=1e-3,
                        seeds=[0], out_dir=str(tmp_path))
        summary = pipelines.cmd_sweep_lambda(cfg)
        per_lambda = {entry["lam"]: entry["val_accuracy"]["mean"] for entry in summary["per_lambda"]}
        assert len(per_lambda) == 20
        assert per_lambda[0.05] < summary["best_val_accuracy"]
