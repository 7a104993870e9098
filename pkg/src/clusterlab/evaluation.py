"""
Latent Clusterability Evaluation
Runs k-means and a GMM on latent representations and scores both against the labels.
"""

from dataclasses import dataclass, field
from typing import Any, Dict, List, Tuple

import numpy as np

import config
from src.clusterlab.gmm import gmm_em
from src.clusterlab.kmeans import kmeans_restarts
from src.clusterlab.metrics import ari, homogeneity_completeness_v_measure, hungarian_align, silhouette
from src.utils.exceptions import ContractViolation
from src.utils.logger import get_logger

logger = get_logger(__name__)


@dataclass
class ClusterReport:
    algorithm: str
    assignments: np.ndarray
    aligned_accuracy: float
    ari: float
    v_measure: float
    silhouette: float
    homogeneity: float
    completeness: float
    objective: float
    iterations: int
    converged: bool
    flags: List[str] = field(default_factory=list)

    def to_dict(self) -> Dict[str, Any]:
        return {
            "algorithm": self.algorithm,
            "aligned_accuracy": self.aligned_accuracy,
            "ari": self.ari,
            "v_measure": self.v_measure,
            "homogeneity": self.homogeneity,
            "completeness": self.completeness,
            "silhouette": None if np.isnan(self.silhouette) else self.silhouette,
            "objective": self.objective,
            "iterations": self.iterations,
            "converged": self.converged,
            "flags": list(self.flags),
            "assignments": self.assignments.tolist(),
        }


def score_partition(algorithm: str, x: np.ndarray, assignments: np.ndarray, labels: np.ndarray,
                    objective: float, iterations: int, converged: bool,
                    flags: List[str]) -> ClusterReport:
    flags = list(flags)
    h, c, v = homogeneity_completeness_v_measure(assignments, labels)
    if np.unique(assignments).size > 1:
        sil = silhouette(x, assignments)
    else:
        sil = float("nan")
        flags.append("silhouette_undefined: single cluster")
        logger.warning(f"{algorithm} put every point in one cluster, silhouette undefined")
    return ClusterReport(
        algorithm=algorithm,
        assignments=assignments,
        aligned_accuracy=hungarian_align(assignments, labels).accuracy,
        ari=ari(assignments, labels, flags),
        v_measure=v,
        silhouette=sil,
        homogeneity=h,
        completeness=c,
        objective=objective,
        iterations=iterations,
        converged=converged,
        flags=flags,
    )


def unit_normalize(x: np.ndarray, eps: float = config.NORM_EPSILON) -> np.ndarray:
    return x / np.maximum(np.linalg.norm(x, axis=1, keepdims=True), eps)


def evaluate_latents(latents: np.ndarray, labels: np.ndarray, k: int, rng: np.random.Generator,
                     n_init: int = config.KMEANS_RESTARTS,
                     normalize: bool = False) -> Tuple[ClusterReport, ClusterReport]:
    """
    k-means (best of `n_init` restarts) and a diagonal GMM started from the
    winning k-means, both scored on the given latents.
    """
    x = np.asarray(latents, dtype=np.float64)
    labels = np.asarray(labels)
    if x.ndim != 2 or labels.shape != (x.shape[0],):
        raise ContractViolation(f"latents {x.shape} and labels {labels.shape} disagree")
    if normalize:
        x = unit_normalize(x)

    km = kmeans_restarts(x, k, rng, n_init=n_init)
    km_report = score_partition("kmeans", x, km.assignments, labels, km.inertia,
                                km.iterations, km.converged, km.flags)
    gm = gmm_em(x, k, rng, init=km)
    gm_report = score_partition("gmm", x, gm.assignments, labels, gm.log_likelihood,
                                gm.iterations, gm.converged, gm.flags)
    for report in (km_report, gm_report):
        logger.info(f"{report.algorithm}: acc {report.aligned_accuracy:.4f} ari {report.ari:.4f} "
                    f"v-m {report.v_measure:.4f} sil {report.silhouette:.4f}")
    return km_report, gm_report
