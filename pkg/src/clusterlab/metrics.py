"""
Clustering Metrics
Hungarian-aligned accuracy, adjusted Rand index, V-measure and silhouette.
"""

from dataclasses import dataclass
from typing import Dict, List, Optional, Tuple

import numpy as np
from scipy.optimize import linear_sum_assignment
from sklearn.metrics import adjusted_rand_score, silhouette_score
from sklearn.metrics import homogeneity_completeness_v_measure as _hcv

from src.utils.exceptions import ContractViolation
from src.utils.logger import get_logger

logger = get_logger(__name__)


def _check_pair(pred, labels) -> Tuple[np.ndarray, np.ndarray]:
    pred = np.asarray(pred)
    labels = np.asarray(labels)
    if pred.ndim != 1 or pred.shape != labels.shape:
        raise ContractViolation(f"Partitions must be equal-length vectors: {pred.shape} vs {labels.shape}")
    return pred, labels


def contingency(pred, labels) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Cluster x class count matrix plus the cluster and class values indexing it."""
    pred, labels = _check_pair(pred, labels)
    clusters, p = np.unique(pred, return_inverse=True)
    classes, c = np.unique(labels, return_inverse=True)
    table = np.zeros((clusters.size, classes.size), dtype=np.int64)
    np.add.at(table, (p, c), 1)
    return table, clusters, classes


@dataclass
class Alignment:
    mapping: Dict[int, int]   # cluster value -> class value
    accuracy: float
    matched: int


def hungarian_align(pred, labels) -> Alignment:
    """
    Maximum-agreement matching of clusters to classes (Kuhn-Munkres on negated
    counts, rectangular tables padded with zero rows/columns).
    """
    pred, labels = _check_pair(pred, labels)
    if pred.size == 0:
        raise ContractViolation("Cannot align empty partitions")
    table, clusters, classes = contingency(pred, labels)
    size = max(table.shape)
    padded = np.zeros((size, size), dtype=np.int64)
    padded[:table.shape[0], :table.shape[1]] = table
    rows, cols = linear_sum_assignment(-padded)

    mapping = {int(clusters[r]): int(classes[c]) for r, c in zip(rows, cols)
               if r < clusters.size and c < classes.size}
    matched = int(padded[rows, cols].sum())
    return Alignment(mapping=mapping, accuracy=matched / pred.size, matched=matched)


def _flag(flags: Optional[List[str]], message: str):
    logger.warning(message)
    if flags is not None:
        flags.append(message)


def _pair_count(counts: np.ndarray) -> float:
    return float(np.sum(counts * (counts - 1) / 2.0))


def ari(pred, labels, flags: Optional[List[str]] = None) -> float:
    """Adjusted Rand index; a zero chance-corrected denominator yields 1.0 for identical partitions, else 0.0."""
    pred, labels = _check_pair(pred, labels)
    table, _, _ = contingency(pred, labels)
    n = pred.size
    total = n * (n - 1) / 2.0
    sum_rows, sum_cols = _pair_count(table.sum(axis=1)), _pair_count(table.sum(axis=0))
    expected = sum_rows * sum_cols / total if total else 0.0
    if 0.5 * (sum_rows + sum_cols) - expected == 0.0:
        same = bool(table.shape[0] == table.shape[1] and np.count_nonzero(table) == table.shape[0])
        _flag(flags, "ari_zero_denominator")
        return 1.0 if same else 0.0
    return float(adjusted_rand_score(labels, pred))


def homogeneity_completeness_v_measure(pred, labels) -> Tuple[float, float, float]:
    """Entropy-based (natural log) homogeneity, completeness and their harmonic mean."""
    pred, labels = _check_pair(pred, labels)
    h, c, v = _hcv(labels, pred)
    return float(h), float(c), float(v)


def v_measure(pred, labels) -> float:
    return homogeneity_completeness_v_measure(pred, labels)[2]


def silhouette(x: np.ndarray, pred) -> float:
    """
    Mean silhouette with Euclidean distances; members of singleton clusters score 0.
    """
    x = np.asarray(x, dtype=np.float64)
    pred = np.asarray(pred)
    if x.ndim != 2 or pred.shape != (x.shape[0],):
        raise ContractViolation(f"silhouette: x {x.shape} and assignments {pred.shape} disagree")
    n_clusters = np.unique(pred).size
    if n_clusters < 2:
        raise ContractViolation("silhouette is undefined for a single cluster")
    # sklearn needs fewer clusters than samples; all singletons score 0
    if n_clusters == x.shape[0]:
        return 0.0
    return float(silhouette_score(x, pred, metric="euclidean"))
