"""
Experiment Pipelines
Implements the command-line operations: multi-seed training, lambda sweeps,
latent export with a 2-D PCA projection, latent clustering and cross-variant
comparison. Every artifact embeds the resolved configuration and seed.
"""

import json
import multiprocessing as mp
import os
from typing import Any, Dict, List, Optional, Sequence, Tuple

import numpy as np
import pandas as pd

import config
from src import data
from src.clusterlab.evaluation import evaluate_latents
from src.data import Dataset
from src.integrations.artifact_store import ArtifactStore
from src.linalg import make_rng, pca_project
from src.losses import LossVariant
from src.models import network
from src.models.ar_classifier import ARClassifier
from src.reporting import aggregate, compare_variants
from src.run_config import RunConfig
from src.trainer import TrainReport, train
from src.utils.exceptions import ConfigError, ContractViolation
from src.utils.logger import get_logger

logger = get_logger(__name__)

PCA_COMPONENTS = 2


def default_lambda_grid(size: int = config.LAMBDA_GRID_SIZE) -> List[float]:
    """`size` evenly spaced values in (0, 1]: 0.05, 0.10, ..., 1.00 for 20."""
    return [(i + 1) / size for i in range(size)]


def _artifact_header(cfg: RunConfig, seed: Optional[int] = None) -> Dict[str, Any]:
    header = {"config": cfg.to_dict(), "config_hash": cfg.config_hash()}
    if seed is not None:
        header["seed"] = seed
    return header


# --- Per-run jobs ---

def run_seed(cfg: RunConfig, dataset: Dataset, seed: int) -> TrainReport:
    """One training run; network init, shuffling and dropout all draw from `seed`."""
    rng = make_rng(seed)
    net = network.init_network(cfg.layer_sizes(dataset.dim), slope=cfg.slope,
                               dropout=cfg.dropout, rng=rng)
    report = train(dataset, net, cfg.loss_config(), epochs=cfg.epochs,
                   batch_size=cfg.batch_size, lr=cfg.lr, rng=rng)
    report.metadata["seed"] = seed
    return report


def _run_job(job: Tuple[RunConfig, Dataset, int]) -> TrainReport:
    cfg, dataset, seed = job
    return run_seed(cfg, dataset, seed)


def run_jobs(jobs: Sequence[Tuple[RunConfig, Dataset, int]], workers: int = 1) -> List[TrainReport]:
    """Results come back in job order whatever the worker count."""
    if workers <= 1 or len(jobs) <= 1:
        return [_run_job(job) for job in jobs]
    logger.info(f"Running {len(jobs)} jobs on {workers} worker processes")
    with mp.Pool(min(workers, len(jobs))) as pool:
        return pool.map(_run_job, jobs)


def _cluster_split(dataset: Dataset) -> str:
    return "test" if dataset.indices("test").size else "val"


def cluster_trained_model(cfg: RunConfig, dataset: Dataset, report: TrainReport,
                          seed: int) -> Dict[str, Any]:
    """Cluster the best model's held-out latents and set the scores beside its own accuracy."""
    split_name = _cluster_split(dataset)
    x, y = dataset.subset(split_name)
    rng = make_rng(seed).spawn(1)[0]
    km, gm = evaluate_latents(report.best_model.latents(x), y, dataset.k, rng,
                              n_init=cfg.kmeans_restarts, normalize=cfg.normalize_latents)
    return {
        "split": split_name,
        "own_accuracy": report.best_model.accuracy(x, y),
        "kmeans": km.to_dict(),
        "gmm": gm.to_dict(),
    }


# --- Commands ---

def cmd_train(cfg: RunConfig) -> Dict[str, Any]:
    """
    Train once per seed and write `train_seed<N>.json`, `checkpoint_seed<N>.json`
    and `aggregate.json` (mean and sample std of test accuracy at the best-val epoch).
    """
    dataset = cfg.load_dataset()
    reports = run_jobs([(cfg, dataset, seed) for seed in sorted(cfg.seeds)], cfg.workers)

    store = ArtifactStore(cfg.out_dir)
    per_seed_test: Dict[int, Optional[float]] = {}
    per_seed_val: Dict[int, Optional[float]] = {}
    failed: List[int] = []
    for seed, report in zip(sorted(cfg.seeds), reports):
        payload = {**_artifact_header(cfg, seed), "report": report.to_dict()}
        if cfg.cluster_after and not report.diverged:
            payload["clustering"] = cluster_trained_model(cfg, dataset, report, seed)
        store.write_json(f"train_seed{seed}.json", payload)
        report.best_model.save(store.path(f"checkpoint_seed{seed}.json"),
                               metadata=_artifact_header(cfg, seed))
        per_seed_test[seed] = report.test_accuracy
        per_seed_val[seed] = report.best_val_accuracy
        if report.diverged:
            failed.append(seed)

    tested = [v for v in per_seed_test.values() if v is not None]
    validated = [v for v in per_seed_val.values() if v is not None]
    summary = {
        **_artifact_header(cfg),
        "seeds": sorted(cfg.seeds),
        "variant": cfg.variant,
        "lam": cfg.resolved_lambda(),
        "test_accuracy": aggregate(tested) if tested else None,
        "best_val_accuracy": aggregate(validated) if validated else None,
        "per_seed_test_accuracy": {str(s): v for s, v in per_seed_test.items()},
        "per_seed_best_val_accuracy": {str(s): v for s, v in per_seed_val.items()},
        "failed_seeds": failed,
    }
    store.write_json("aggregate.json", summary)
    if summary["test_accuracy"]:
        logger.info(f"{cfg.variant}: test accuracy {summary['test_accuracy']['mean']:.4f} "
                    f"± {summary['test_accuracy']['std']:.4f} over {len(tested)} seeds")
    return summary


def cmd_sweep_lambda(cfg: RunConfig, grid: Optional[Sequence[float]] = None) -> Dict[str, Any]:
    """
    Train once per (seed, lambda) and tabulate best validation accuracy.
    The reported best lambda maximises the seed-mean; ties go to the smaller lambda.
    """
    if LossVariant(cfg.variant) is LossVariant.CCE:
        raise ConfigError("CCE has no lambda to sweep")
    grid = list(default_lambda_grid() if grid is None else grid)
    if not grid:
        raise ConfigError("Lambda grid is empty")
    for lam in grid:
        if isinstance(lam, bool) or not isinstance(lam, (int, float)) or not 0.0 < lam <= 1.0:
            raise ConfigError(f"Lambda grid values must lie in (0, 1], got {lam!r}")
    grid = sorted(set(float(lam) for lam in grid))

    dataset = cfg.load_dataset()
    jobs = [(cfg.with_overrides(lam=lam), dataset, seed)
            for seed in sorted(cfg.seeds) for lam in grid]
    reports = run_jobs(jobs, cfg.workers)

    rows = []
    for (job_cfg, _, seed), report in zip(jobs, reports):
        rows.append({
            "seed": seed,
            "lam": job_cfg.resolved_lambda(),
            "best_val_accuracy": report.best_val_accuracy,
            "best_epoch": report.best_epoch,
            "test_accuracy": report.test_accuracy,
            "diverged": report.diverged,
        })
    frame = pd.DataFrame(rows, columns=["seed", "lam", "best_val_accuracy", "best_epoch",
                                        "test_accuracy", "diverged"])

    per_lambda = []
    for lam in grid:
        values = [r["best_val_accuracy"] for r in rows
                  if r["lam"] == lam and r["best_val_accuracy"] is not None]
        per_lambda.append({"lam": lam, "val_accuracy": aggregate(values) if values else None})
    scored = [entry for entry in per_lambda if entry["val_accuracy"] is not None]
    best = max(scored, key=lambda e: (e["val_accuracy"]["mean"], -e["lam"])) if scored else None

    store = ArtifactStore(cfg.out_dir)
    store.write_csv("sweep.csv", frame, meta={**_artifact_header(cfg), "seeds": sorted(cfg.seeds),
                                              "grid": grid})
    summary = {
        **_artifact_header(cfg),
        "seeds": sorted(cfg.seeds),
        "grid": grid,
        "per_lambda": per_lambda,
        "best_lambda": best["lam"] if best else None,
        "best_val_accuracy": best["val_accuracy"]["mean"] if best else None,
    }
    store.write_json("sweep_summary.json", summary)
    if best:
        logger.info(f"Best lambda {best['lam']} with mean val accuracy {best['val_accuracy']['mean']:.4f}")
    return summary


def read_checkpoint_metadata(path: str) -> Dict[str, Any]:
    try:
        with open(path, "r", encoding="utf-8") as f:
            return json.load(f).get("metadata", {})
    except (OSError, json.JSONDecodeError) as e:
        raise ConfigError(f"Cannot read checkpoint {path}: {e}") from e


def cmd_export_latents(cfg: RunConfig, checkpoint: str, split: str = "test") -> Dict[str, Any]:
    """
    Write `latents_<split>.csv` (f0..f{H-1},label) and `pca_<split>.csv`
    (pc1,pc2,label) for the chosen split under the checkpoint's network.
    """
    if split not in data.SPLITS:
        raise ConfigError(f"split must be one of {data.SPLITS}, got '{split}'")
    model = ARClassifier.load(checkpoint)
    seed = read_checkpoint_metadata(checkpoint).get("seed")
    dataset = cfg.load_dataset()
    if model.net.input_dim != dataset.dim:
        raise ConfigError(f"Checkpoint expects {model.net.input_dim} inputs, "
                          f"dataset has {dataset.dim}")
    x, y = dataset.subset(split)
    if x.shape[0] == 0:
        raise ContractViolation(f"Split '{split}' is empty, nothing to export")

    h = model.latents(x)
    if h.shape[0] < 2:
        raise ContractViolation("PCA export needs at least 2 samples")
    n_components = min(PCA_COMPONENTS, h.shape[0], h.shape[1])
    pca = pca_project(h, n_components)
    projection = np.zeros((h.shape[0], PCA_COMPONENTS))
    projection[:, :pca.projection.shape[1]] = pca.projection

    latents = pd.DataFrame(h, columns=[f"f{i}" for i in range(h.shape[1])])
    latents["label"] = y
    pcs = pd.DataFrame(projection, columns=[f"pc{i + 1}" for i in range(PCA_COMPONENTS)])
    pcs["label"] = y

    meta = {**_artifact_header(cfg, seed), "checkpoint": os.path.basename(checkpoint),
            "split": split, "rows": int(h.shape[0]), "latent_dim": int(h.shape[1])}
    store = ArtifactStore(cfg.out_dir)
    latents_path = store.write_csv(f"latents_{split}.csv", latents, meta=meta)
    pca_path = store.write_csv(f"pca_{split}.csv", pcs, meta={
        **meta,
        "explained_variance_ratio": pca.explained_variance_ratio.tolist(),
        "flags": pca.flags,
    })
    return {"latents": latents_path, "pca": pca_path, "rows": int(h.shape[0]),
            "pca_flags": pca.flags}


def cmd_cluster(cfg: RunConfig, latents_path: str, k: int) -> Dict[str, Any]:
    """Run k-means and the GMM on an exported latent CSV and write `cluster_report.json`."""
    if isinstance(k, bool) or not isinstance(k, int) or k < 2:
        raise ConfigError(f"k must be an integer >= 2, got {k!r}")
    latents = data.load_csv(latents_path, header=True, name="latents")
    if k >= latents.n:
        raise ConfigError(f"k={k} needs more than {latents.n} rows")
    seed = sorted(cfg.seeds)[0]
    km, gm = evaluate_latents(latents.x, latents.y, k, make_rng(seed),
                              n_init=cfg.kmeans_restarts, normalize=cfg.normalize_latents)
    payload = {
        **_artifact_header(cfg, seed),
        "source": os.path.basename(latents_path),
        "k": k,
        "rows": latents.n,
        "kmeans": km.to_dict(),
        "gmm": gm.to_dict(),
    }
    ArtifactStore(cfg.out_dir).write_json("cluster_report.json", payload)
    return payload


def _comparison_label(summary: Dict[str, Any], taken: Dict[str, Any]) -> str:
    label = summary["variant"]
    if label in taken:
        label = f"{label} (lam={summary['lam']})"
    return label


def cmd_compare(cfg: RunConfig, report_paths: Sequence[str]) -> Dict[str, Any]:
    """
    Mean ± sample std of test accuracy per `aggregate.json`, with a paired
    two-tailed t-test of the best variant against the runner-up on shared seeds.
    """
    if len(report_paths) < 1:
        raise ConfigError("compare needs at least one aggregate.json")
    store = ArtifactStore(cfg.out_dir)
    runs: Dict[str, Dict[int, float]] = {}
    sources = []
    for path in report_paths:
        summary = store.read_json(path)
        if "per_seed_test_accuracy" not in summary or "variant" not in summary:
            raise ConfigError(f"{path} is not an aggregate report")
        label = _comparison_label(summary, runs)
        runs[label] = {int(seed): acc for seed, acc in summary["per_seed_test_accuracy"].items()
                       if acc is not None}
        if not runs[label]:
            raise ConfigError(f"{path} holds no test accuracies")
        sources.append({"label": label, "file": os.path.basename(path),
                        "config_hash": summary.get("config_hash")})

    rows = compare_variants(runs)
    frame = pd.DataFrame(rows, columns=["variant", "mean", "std", "n", "display",
                                        "p_value_vs_next", "significance"])
    store.write_csv("comparison.csv", frame, meta={**_artifact_header(cfg), "sources": sources})
    payload = {**_artifact_header(cfg), "sources": sources, "rows": rows}
    store.write_json("comparison.json", payload)
    return payload
