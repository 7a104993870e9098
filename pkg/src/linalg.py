"""
Dense Linear Algebra Helpers
Shape-checked float64 matrix operations, stable log-sum-exp, seeded RNGs and PCA.
"""

from dataclasses import dataclass, field
from typing import List

import numpy as np
from scipy.special import logsumexp

from src.utils.exceptions import ContractViolation
from src.utils.logger import get_logger

logger = get_logger(__name__)

# Relative eigenvalue cutoff below which a PCA direction counts as absent
RANK_TOLERANCE = 1e-12


def make_rng(seed: int) -> np.random.Generator:
    """Seeded PCG64 generator; equal seeds give equal streams."""
    return np.random.Generator(np.random.PCG64(int(seed)))


def as_matrix(a, name: str = "matrix") -> np.ndarray:
    """Coerce to a finite 2-D float64 array."""
    m = np.asarray(a, dtype=np.float64)
    if m.ndim == 1:
        m = m.reshape(1, -1)
    if m.ndim != 2:
        raise ContractViolation(f"{name} must be 2-D, got shape {m.shape}")
    if not np.all(np.isfinite(m)):
        raise ContractViolation(f"{name} contains NaN or Inf")
    return m


def _require_same_shape(a: np.ndarray, b: np.ndarray, op: str):
    if a.shape != b.shape:
        raise ContractViolation(f"{op}: shape mismatch {a.shape} vs {b.shape}")


def matmul(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    if a.ndim != 2 or b.ndim != 2 or a.shape[1] != b.shape[0]:
        raise ContractViolation(f"matmul: cannot multiply {a.shape} by {b.shape}")
    return a @ b


def add(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    _require_same_shape(a, b, "add")
    return a + b


def sub(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    _require_same_shape(a, b, "sub")
    return a - b


def hadamard(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    _require_same_shape(a, b, "hadamard")
    return a * b


def scale(a: np.ndarray, c: float) -> np.ndarray:
    return a * float(c)


def transpose(a: np.ndarray) -> np.ndarray:
    return np.ascontiguousarray(a.T)


def row_sum(m: np.ndarray) -> np.ndarray:
    return m.sum(axis=1)


def row_max(m: np.ndarray) -> np.ndarray:
    return m.max(axis=1)


def row_argmax(m: np.ndarray) -> np.ndarray:
    """Per-row argmax; ties resolve to the lowest column index."""
    return np.argmax(m, axis=1)


def row_sq_norms(m: np.ndarray) -> np.ndarray:
    return np.einsum("ij,ij->i", m, m)


def logsumexp_rows(m: np.ndarray) -> np.ndarray:
    """log sum exp per row, computed in max-shifted form."""
    return logsumexp(m, axis=1)


def softmax_rows(m: np.ndarray) -> np.ndarray:
    return np.exp(m - logsumexp_rows(m)[:, None])


def one_hot(labels: np.ndarray, k: int) -> np.ndarray:
    out = np.zeros((labels.shape[0], k))
    out[np.arange(labels.shape[0]), labels] = 1.0
    return out


@dataclass
class PCAProjection:
    projection: np.ndarray          # N x n_components
    components: np.ndarray          # n_components x D, unit rows
    mean: np.ndarray                # D
    explained_variance: np.ndarray
    explained_variance_ratio: np.ndarray
    flags: List[str] = field(default_factory=list)

    @property
    def degenerate(self) -> bool:
        return bool(self.flags)

    def reconstruct(self) -> np.ndarray:
        return self.projection @ self.components + self.mean


def pca_project(x: np.ndarray, n_components: int) -> PCAProjection:
    """
    Project mean-centered rows onto the top covariance eigenvectors.
    Each component is sign-fixed so its largest-magnitude loading is positive.
    """
    x = as_matrix(x, "x")
    n, d = x.shape
    if n < 2:
        raise ContractViolation("pca_project needs at least 2 rows")
    if n_components < 1 or n_components > min(n, d):
        raise ContractViolation(f"n_components={n_components} outside [1, {min(n, d)}]")

    mean = x.mean(axis=0)
    centered = x - mean
    cov = centered.T @ centered / (n - 1)
    eigvals, eigvecs = np.linalg.eigh(cov)
    order = np.argsort(eigvals)[::-1]
    eigvals = np.clip(eigvals[order], 0.0, None)
    eigvecs = eigvecs[:, order]

    total = eigvals.sum()
    flags = []
    cutoff = RANK_TOLERANCE * (eigvals[0] if eigvals[0] > 0 else 1.0)
    available = int(np.sum(eigvals[:n_components] > cutoff))
    if available < n_components:
        flags.append(f"rank_deficient: {available} of {n_components} components available")
        logger.warning(f"PCA covariance is rank deficient, returning {available} components")

    components = eigvecs[:, :available].T.copy()
    for row in components:
        if row[np.argmax(np.abs(row))] < 0:
            row *= -1.0

    explained = eigvals[:available]
    ratio = explained / total if total > 0 else np.zeros_like(explained)
    return PCAProjection(
        projection=centered @ components.T,
        components=components,
        mean=mean,
        explained_variance=explained,
        explained_variance_ratio=ratio,
        flags=flags,
    )
