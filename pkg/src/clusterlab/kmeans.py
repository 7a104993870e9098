"""
K-Means
k-means++ seeding, Lloyd iterations and best-of-n seeded restarts.
"""

from dataclasses import dataclass, field
from typing import List, Optional

import numpy as np

import config
from src.losses import squared_distances
from src.utils.exceptions import ContractViolation
from src.utils.logger import get_logger

logger = get_logger(__name__)


@dataclass
class KMeansResult:
    assignments: np.ndarray
    centroids: np.ndarray
    inertia: float
    iterations: int
    converged: bool
    inertia_history: List[float] = field(default_factory=list)
    flags: List[str] = field(default_factory=list)

    @property
    def effective_clusters(self) -> int:
        return int(np.unique(self.assignments).size)


def _assign(x: np.ndarray, centroids: np.ndarray):
    d2 = squared_distances(x, centroids)
    labels = np.argmin(d2, axis=1)
    return labels, d2[np.arange(x.shape[0]), labels]


def kmeans_plus_plus(x: np.ndarray, k: int, rng: np.random.Generator):
    """D^2-weighted seeding. Returns centroids and whether seeding ran out of distinct points."""
    n = x.shape[0]
    centroids = np.empty((k, x.shape[1]))
    centroids[0] = x[rng.integers(n)]
    closest = squared_distances(x, centroids[:1])[:, 0]
    exhausted = False
    for j in range(1, k):
        total = closest.sum()
        if total <= 0.0:
            exhausted = True
            idx = rng.integers(n)
        else:
            idx = rng.choice(n, p=closest / total)
        centroids[j] = x[idx]
        closest = np.minimum(closest, squared_distances(x, centroids[j:j + 1])[:, 0])
    return centroids, exhausted


def kmeans(x: np.ndarray, k: int, rng: np.random.Generator,
           max_iter: int = config.KMEANS_MAX_ITER, tol: float = config.KMEANS_TOL) -> KMeansResult:
    """
    Lloyd's algorithm from a k-means++ start. Stops once no centroid moves by
    `tol` or more. An empty cluster takes the point farthest from its own centroid.
    """
    x = np.asarray(x, dtype=np.float64)
    n = x.shape[0]
    if not 1 <= k <= n:
        raise ContractViolation(f"k={k} must lie in [1, {n}]")
    if max_iter < 1:
        raise ContractViolation("max_iter must be >= 1")

    centroids, exhausted = kmeans_plus_plus(x, k, rng)
    flags = []
    if exhausted:
        flags.append("fewer_distinct_points_than_k")

    history, converged, iterations = [], False, 0
    for iterations in range(1, max_iter + 1):
        labels, d2 = _assign(x, centroids)
        history.append(float(d2.sum()))

        updated = np.empty_like(centroids)
        counts = np.bincount(labels, minlength=k)
        for j in range(k):
            if counts[j]:
                updated[j] = x[labels == j].mean(axis=0)
            else:
                far = int(np.argmax(d2))
                updated[j] = x[far]
                d2[far] = 0.0

        shift = float(np.max(np.linalg.norm(updated - centroids, axis=1)))
        centroids = updated
        if shift < tol:
            converged = True
            break

    labels, d2 = _assign(x, centroids)
    inertia = float(d2.sum())
    history.append(inertia)
    result = KMeansResult(labels, centroids, inertia, iterations, converged, history, flags)
    if result.effective_clusters < k:
        result.flags.append(f"effective_clusters={result.effective_clusters}")
        logger.warning(f"k-means found only {result.effective_clusters} of {k} clusters")
    return result


def kmeans_restarts(x: np.ndarray, k: int, rng: np.random.Generator,
                    n_init: int = config.KMEANS_RESTARTS, max_iter: int = config.KMEANS_MAX_ITER,
                    tol: float = config.KMEANS_TOL) -> KMeansResult:
    """Best of `n_init` runs by inertia, each on its own spawned rng; ties keep the earliest."""
    if n_init < 1:
        raise ContractViolation("n_init must be >= 1")
    best: Optional[KMeansResult] = None
    for child in rng.spawn(n_init):
        result = kmeans(x, k, child, max_iter, tol)
        if best is None or result.inertia < best.inertia:
            best = result
    logger.info(f"k-means best inertia {best.inertia:.6g} over {n_init} restarts")
    return best
