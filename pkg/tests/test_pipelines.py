"""End-to-end tests for the command pipelines and the command line."""

import dataclasses
import json
import os

import numpy as np
import pandas as pd
import pytest

import app
from src import pipelines
from src.models.ar_classifier import ARClassifier
from src.utils.exceptions import ConfigError, CsvParseError


def _read(path):
    with open(path, "rb") as f:
        return f.read()


def _cli_args(cfg):
    return ["--dataset", "blobs", "--blobs_k", str(cfg.blobs_k),
            "--blobs_n_per_class", str(cfg.blobs_n_per_class), "--blobs_dim", str(cfg.blobs_dim),
            "--blobs_sigma", str(cfg.blobs_sigma), "--variant", cfg.variant, "--lam", str(cfg.lam),
            "--hidden_sizes", json.dumps(cfg.hidden_sizes), "--epochs", str(cfg.epochs),
            "--batch_size", str(cfg.batch_size), "--lr", str(cfg.lr),
            "--kmeans_restarts", str(cfg.kmeans_restarts)]


class TestTrainCommand:

    def test_writes_reports_and_checkpoints(self, tiny_config):
        """One report and checkpoint per seed plus the aggregate."""
        summary = pipelines.cmd_train(tiny_config)
        out = tiny_config.out_dir
        for seed in (0, 1):
            assert os.path.exists(os.path.join(out, f"train_seed{seed}.json"))
            assert os.path.exists(os.path.join(out, f"checkpoint_seed{seed}.json"))
        assert summary["test_accuracy"]["n"] == 2
        report = json.loads(_read(os.path.join(out, "train_seed1.json")))
        assert report["seed"] == 1
        assert report["config"] == tiny_config.to_dict()

    def test_byte_identical_reruns(self, tiny_config, tmp_path):
        """Repeating a run reproduces every artifact byte for byte."""
        first = tiny_config
        second = dataclasses.replace(tiny_config, out_dir=str(tmp_path / "again"))
        pipelines.cmd_train(first)
        pipelines.cmd_train(second)
        names = sorted(os.listdir(first.out_dir))
        assert names == sorted(os.listdir(second.out_dir))
        for name in names:
            assert _read(os.path.join(first.out_dir, name)) == _read(os.path.join(second.out_dir, name)), name

    def test_parallel_matches_serial(self, tiny_config, tmp_path):
        """Worker processes do not change results."""
        parallel = dataclasses.replace(tiny_config, out_dir=str(tmp_path / "par"), workers=2)
        pipelines.cmd_train(tiny_config)
        pipelines.cmd_train(parallel)
        assert _read(os.path.join(tiny_config.out_dir, "aggregate.json")) == \
            _read(os.path.join(parallel.out_dir, "aggregate.json"))

    def test_checkpoint_reloads_best_model(self, tiny_config):
        """The saved checkpoint reproduces the reported test accuracy."""
        summary = pipelines.cmd_train(tiny_config)
        model = ARClassifier.load(os.path.join(tiny_config.out_dir, "checkpoint_seed0.json"))
        ds = tiny_config.load_dataset()
        assert model.accuracy(*ds.subset("test")) == summary["per_seed_test_accuracy"]["0"]

    def test_cluster_after(self, tiny_config):
        """Clustering results sit beside the model's own accuracy."""
        cfg = tiny_config.with_overrides(cluster_after=True, seeds=[0])
        pipelines.cmd_train(cfg)
        report = json.loads(_read(os.path.join(cfg.out_dir, "train_seed0.json")))
        clustering = report["clustering"]
        assert set(clustering) == {"split", "own_accuracy", "kmeans", "gmm"}
        assert 0.0 <= clustering["kmeans"]["aligned_accuracy"] <= 1.0

    def test_zero_epochs(self, tiny_config):
        """An untrained network still yields a report."""
        summary = pipelines.cmd_train(tiny_config.with_overrides(epochs=0, seeds=[0]))
        assert 0.0 <= summary["test_accuracy"]["mean"] <= 1.0


class TestSweepCommand:

    def test_grid_rows_and_best_lambda(self, tiny_config):
        """One row per (seed, lambda), sorted, and a best lambda from the grid."""
        summary = pipelines.cmd_sweep_lambda(tiny_config, [0.9, 0.5])
        frame = pd.read_csv(os.path.join(tiny_config.out_dir, "sweep.csv"))
        assert list(frame["seed"]) == [0, 0, 1, 1]
        assert list(frame["lam"]) == [0.5, 0.9, 0.5, 0.9]
        assert summary["best_lambda"] in (0.5, 0.9)
        assert os.path.exists(os.path.join(tiny_config.out_dir, "sweep.csv.meta.json"))

    def test_default_grid(self):
        """Twenty values from 0.05 to 1.0."""
        grid = pipelines.default_lambda_grid()
        assert len(grid) == 20
        assert grid[0] == 0.05 and grid[-1] == 1.0

    def test_cce_rejected(self, tiny_config):
        """CCE has no lambda."""
        with pytest.raises(ConfigError):
            pipelines.cmd_sweep_lambda(tiny_config.with_overrides(variant="cce"), [0.5])

    def test_grid_outside_unit_interval(self, tiny_config):
        """Grid values must lie in (0, 1]."""
        with pytest.raises(ConfigError):
            pipelines.cmd_sweep_lambda(tiny_config, [0.0, 0.5])
        assert not os.path.exists(tiny_config.out_dir)


class TestExportAndCluster:

    @pytest.fixture
    def checkpoint(self, tiny_config):
        pipelines.cmd_train(tiny_config.with_overrides(seeds=[0]))
        return os.path.join(tiny_config.out_dir, "checkpoint_seed0.json")

    def test_export_latents(self, tiny_config, checkpoint):
        """Latent CSV has H feature columns plus the label; PCA CSV has two components."""
        result = pipelines.cmd_export_latents(tiny_config, checkpoint, "test")
        latents = pd.read_csv(result["latents"])
        assert list(latents.columns) == [f"f{i}" for i in range(6)] + ["label"]
        assert latents.shape[0] == result["rows"]
        pca = pd.read_csv(result["pca"])
        assert list(pca.columns) == ["pc1", "pc2", "label"]
        meta = json.loads(_read(result["latents"] + ".meta.json"))
        assert meta["seed"] == 0

    def test_export_is_lossless_and_repeatable(self, tiny_config, checkpoint, tmp_path):
        """Latents survive the CSV round trip exactly and re-export gives identical bytes."""
        first = pipelines.cmd_export_latents(tiny_config, checkpoint, "val")
        again = pipelines.cmd_export_latents(tiny_config.with_overrides(out_dir=str(tmp_path / "re")),
                                             checkpoint, "val")
        assert _read(first["latents"]) == _read(again["latents"])
        model = ARClassifier.load(checkpoint)
        x, _ = tiny_config.load_dataset().subset("val")
        values = pd.read_csv(first["latents"], float_precision="round_trip").drop(columns="label").to_numpy()
        np.testing.assert_array_equal(values, model.latents(x))

    def test_dimension_mismatch(self, tiny_config, checkpoint):
        """A dataset of another width is a configuration error."""
        with pytest.raises(ConfigError):
            pipelines.cmd_export_latents(tiny_config.with_overrides(blobs_dim=5), checkpoint)

    def test_cluster_exported_latents(self, tiny_config, checkpoint):
        """cluster writes both algorithm reports."""
        exported = pipelines.cmd_export_latents(tiny_config, checkpoint, "train")
        payload = pipelines.cmd_cluster(tiny_config, exported["latents"], 3)
        assert payload["kmeans"]["algorithm"] == "kmeans"
        assert payload["gmm"]["algorithm"] == "gmm"
        assert os.path.exists(os.path.join(tiny_config.out_dir, "cluster_report.json"))

    def test_cluster_one_hot_latents(self, tiny_config, tmp_path):
        """One-hot latents score perfectly."""
        path = tmp_path / "onehot.csv"
        labels = np.repeat(np.arange(3), 5)
        frame = pd.DataFrame(np.eye(3)[labels], columns=["f0", "f1", "f2"])
        frame["label"] = labels
        frame.to_csv(path, index=False)
        payload = pipelines.cmd_cluster(tiny_config, str(path), 3)
        assert payload["kmeans"]["aligned_accuracy"] == 1.0
        assert payload["kmeans"]["silhouette"] == pytest.approx(1.0)

    def test_malformed_csv(self, tiny_config, tmp_path):
        """A bad latent file reports its line number."""
        path = tmp_path / "bad.csv"
        path.write_text("f0,f1,label\n0.1,0.2,0\n0.3,x,1\n")
        with pytest.raises(CsvParseError) as err:
            pipelines.cmd_cluster(tiny_config, str(path), 2)
        assert err.value.line == 3


class TestCompareCommand:

    def test_compare_aggregates(self, tiny_config, tmp_path):
        """Two variants compared over shared seeds."""
        gaussian = tiny_config.with_overrides(out_dir=str(tmp_path / "g"))
        cce = tiny_config.with_overrides(variant="cce", out_dir=str(tmp_path / "c"))
        pipelines.cmd_train(gaussian)
        pipelines.cmd_train(cce)
        payload = pipelines.cmd_compare(
            tiny_config.with_overrides(out_dir=str(tmp_path / "cmp")),
            [os.path.join(gaussian.out_dir, "aggregate.json"), os.path.join(cce.out_dir, "aggregate.json")])
        assert {row["variant"] for row in payload["rows"]} == {"gaussian", "cce"}
        assert os.path.exists(tmp_path / "cmp" / "comparison.csv")


class TestCommandLine:

    def test_train_exit_zero(self, tiny_config):
        """A valid run exits 0 and writes the aggregate."""
        status = app.main(["train", *_cli_args(tiny_config), "--seed", "0", "--out", tiny_config.out_dir])
        assert status == 0
        assert os.path.exists(os.path.join(tiny_config.out_dir, "aggregate.json"))

    def test_invalid_config_exit_two_no_outputs(self, tmp_path):
        """A bad config exits 2 and writes nothing."""
        out = tmp_path / "never"
        status = app.main(["train", "--dataset", "blobs", "--epochs", "-3", "--out", str(out)])
        assert status == 2
        assert not out.exists()

    def test_unknown_config_key_exit_two(self, tmp_path):
        """Unknown keys in the config file are rejected."""
        path = tmp_path / "run.json"
        path.write_text(json.dumps({"dataset": "blobs", "colour": "blue"}))
        assert app.main(["train", "--config", str(path), "--out", str(tmp_path / "o")]) == 2

    def test_bad_seed_list(self, tmp_path):
        """Seeds must be integers."""
        assert app.main(["train", "--dataset", "blobs", "--seed", "1,x", "--out", str(tmp_path)]) == 2

    def test_unknown_command(self):
        """argparse usage errors surface as status 2."""
        assert app.main(["dance"]) == 2

    def test_export_uses_embedded_config(self, tiny_config, tmp_path):
        """Without --config, export-latents rebuilds the dataset from the checkpoint."""
        pipelines.cmd_train(tiny_config.with_overrides(seeds=[0]))
        checkpoint = os.path.join(tiny_config.out_dir, "checkpoint_seed0.json")
        out = tmp_path / "export"
        assert app.main(["export-latents", "--checkpoint", checkpoint, "--out", str(out)]) == 0
        assert (out / "latents_test.csv").exists()
        assert (out / "pca_test.csv").exists()

    def test_value_parsing(self):
        """Override values are JSON when possible, strings otherwise."""
        assert app._parse_value("0.5") == 0.5
        assert app._parse_value("null") is None
        assert app._parse_value("[8, 4]") == [8, 4]
        assert app._parse_value("gaussian") == "gaussian"
