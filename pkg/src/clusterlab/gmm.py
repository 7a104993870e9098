"""
Gaussian Mixture Model
Diagonal-covariance mixture fitted by EM in log space, initialised from k-means.
"""

from dataclasses import dataclass, field
from typing import List, Optional

import numpy as np

import config
from src.clusterlab.kmeans import KMeansResult, kmeans_restarts
from src.linalg import logsumexp_rows
from src.utils.exceptions import ContractViolation
from src.utils.logger import get_logger

logger = get_logger(__name__)

LOG_2PI = np.log(2.0 * np.pi)


@dataclass
class GMMResult:
    assignments: np.ndarray
    weights: np.ndarray     # K
    means: np.ndarray       # K x D
    variances: np.ndarray   # K x D
    log_likelihood: float
    iterations: int
    converged: bool
    ll_history: List[float] = field(default_factory=list)
    flags: List[str] = field(default_factory=list)


def component_log_densities(x: np.ndarray, weights: np.ndarray, means: np.ndarray,
                            variances: np.ndarray) -> np.ndarray:
    """N x K matrix of log(pi_k) + log N(x_i | mu_k, diag(var_k))."""
    d = x.shape[1]
    log_det = np.sum(np.log(variances), axis=1)
    maha = np.empty((x.shape[0], means.shape[0]))
    for j in range(means.shape[0]):
        diff = x - means[j]
        maha[:, j] = np.sum(diff * diff / variances[j], axis=1)
    with np.errstate(divide="ignore"):
        log_w = np.log(weights)
    return log_w[None, :] - 0.5 * (d * LOG_2PI + log_det[None, :] + maha)


def _init_from_kmeans(x: np.ndarray, init: KMeansResult, k: int, var_floor: float):
    n = x.shape[0]
    global_var = np.maximum(x.var(axis=0), var_floor)
    weights = np.empty(k)
    variances = np.empty((k, x.shape[1]))
    for j in range(k):
        members = x[init.assignments == j]
        weights[j] = members.shape[0] / n
        variances[j] = np.maximum(members.var(axis=0), var_floor) if members.shape[0] > 1 else global_var
    return weights, init.centroids.copy(), variances


def gmm_em(x: np.ndarray, k: int, rng: np.random.Generator,
           max_iter: int = config.GMM_MAX_ITER, tol: float = config.GMM_TOL,
           init: Optional[KMeansResult] = None,
           var_floor: float = config.GMM_VAR_FLOOR,
           min_weight: float = config.GMM_MIN_WEIGHT) -> GMMResult:
    """
    EM until the log-likelihood improves by less than `tol`. Variances are
    floored at `var_floor`; a component whose weight drops below `min_weight`
    is re-spread onto a random data point with the global variance.
    """
    x = np.asarray(x, dtype=np.float64)
    n = x.shape[0]
    if not 1 <= k < n:
        raise ContractViolation(f"GMM needs 1 <= k < N, got k={k}, N={n}")
    if max_iter < 1:
        raise ContractViolation("max_iter must be >= 1")
    if init is None:
        init = kmeans_restarts(x, k, rng)

    weights, means, variances = _init_from_kmeans(x, init, k, var_floor)
    global_var = np.maximum(x.var(axis=0), var_floor)
    flags: List[str] = []
    history: List[float] = []
    converged = False
    iterations = 0

    for iterations in range(1, max_iter + 1):
        collapsed = np.flatnonzero(weights < min_weight)
        if collapsed.size:
            for j in collapsed:
                means[j] = x[rng.integers(n)]
                variances[j] = global_var
                weights[j] = 1.0 / k
            weights = weights / weights.sum()
            flags.append(f"collapse_respread: components {collapsed.tolist()} at iteration {iterations}")
            logger.warning(f"GMM components {collapsed.tolist()} collapsed and were re-spread")

        # E-step
        log_prob = component_log_densities(x, weights, means, variances)
        lse = logsumexp_rows(log_prob)
        ll = float(lse.sum())
        history.append(ll)
        resp = np.exp(log_prob - lse[:, None])
        if len(history) > 1 and not collapsed.size and ll - history[-2] < tol:
            converged = True
            break

        # M-step
        nk = resp.sum(axis=0)
        safe = np.maximum(nk, np.finfo(float).tiny)
        weights = nk / n
        means = (resp.T @ x) / safe[:, None]
        for j in range(k):
            diff = x - means[j]
            variances[j] = np.maximum(resp[:, j] @ (diff * diff) / safe[j], var_floor)

    log_prob = component_log_densities(x, weights, means, variances)
    lse = logsumexp_rows(log_prob)
    assignments = np.argmax(log_prob, axis=1)
    return GMMResult(
        assignments=assignments,
        weights=weights,
        means=means,
        variances=variances,
        log_likelihood=float(lse.sum()),
        iterations=iterations,
        converged=converged,
        ll_history=history,
        flags=flags,
    )
