"""
Attractive-Repulsive Losses
Similarity functions, the four loss variants (CCE, center loss, Cosine-COREL,
Gaussian-COREL) and their exact gradients with respect to h, W and the centers.

Every variant follows the same shape:
    loss_i = -lambda * attract(h_i, w_{y_i}) + (1 - lambda) * repulse(h_i, W)
with CCE using the unweighted dot-product form.
"""

from dataclasses import dataclass, field, asdict
from enum import Enum
from typing import Any, Dict, Optional, Tuple

import numpy as np

import config
from src.linalg import logsumexp_rows, one_hot, row_argmax, softmax_rows
from src.utils.exceptions import ConfigError, ContractViolation
from src.utils.logger import get_logger

logger = get_logger(__name__)

# Rows of h processed at once when forming N x K x H difference tensors
_DIST_CHUNK = 1024


class LossVariant(str, Enum):
    CCE = "cce"
    CENTER = "center"
    COSINE = "cosine"
    GAUSSIAN = "gaussian"


REDUCTIONS = ("mean", "sum")


@dataclass(frozen=True)
class LossConfig:
    variant: LossVariant = LossVariant.CCE
    lam: float = config.DEFAULT_LAMBDA
    gamma: float = config.GAMMA
    alpha: float = config.CENTER_ALPHA
    reduction: str = config.REDUCTION
    eps_norm: float = config.NORM_EPSILON

    def __post_init__(self):
        object.__setattr__(self, "variant", LossVariant(self.variant))
        if self.variant in (LossVariant.COSINE, LossVariant.GAUSSIAN) and not 0.0 < self.lam <= 1.0:
            raise ConfigError(f"lambda must lie in (0, 1] for {self.variant.value}, got {self.lam}")
        if self.variant is LossVariant.CENTER and self.lam < 0:
            raise ConfigError(f"center loss lambda must be >= 0, got {self.lam}")
        if self.gamma <= 0:
            raise ConfigError(f"gamma must be positive, got {self.gamma}")
        if not 0.0 < self.alpha <= 1.0:
            raise ConfigError(f"alpha must lie in (0, 1], got {self.alpha}")
        if self.reduction not in REDUCTIONS:
            raise ConfigError(f"reduction must be one of {REDUCTIONS}, got {self.reduction}")
        if self.eps_norm <= 0:
            raise ConfigError("eps_norm must be positive")

    def to_dict(self) -> Dict[str, Any]:
        out = asdict(self)
        out["variant"] = self.variant.value
        return out


@dataclass
class ClassParams:
    W: np.ndarray                         # K x H class representatives
    centers: Optional[np.ndarray] = None  # K x H, center loss only

    @property
    def k(self) -> int:
        return self.W.shape[0]

    def copy(self) -> "ClassParams":
        return ClassParams(self.W.copy(), None if self.centers is None else self.centers.copy())


def init_class_params(k: int, latent_dim: int, rng: np.random.Generator,
                      with_centers: bool = False) -> ClassParams:
    """Glorot-uniform W, zero centers."""
    limit = np.sqrt(6.0 / (k + latent_dim))
    W = rng.uniform(-limit, limit, size=(k, latent_dim))
    return ClassParams(W, np.zeros((k, latent_dim)) if with_centers else None)


@dataclass
class LossOutput:
    loss: float
    dh: np.ndarray
    dW: np.ndarray
    predictions: np.ndarray
    per_sample: np.ndarray
    center_deltas: Optional[np.ndarray] = None
    diagnostics: Dict[str, Any] = field(default_factory=dict)


# --- Similarities ---

def sim_dot(h: np.ndarray, w: np.ndarray) -> float:
    if h.shape != w.shape:
        raise ContractViolation(f"sim_dot: {h.shape} vs {w.shape}")
    return float(np.dot(h, w))


def sim_cos(h: np.ndarray, w: np.ndarray, eps_norm: float = config.NORM_EPSILON,
            diagnostics: Optional[Dict[str, Any]] = None) -> float:
    if h.shape != w.shape:
        raise ContractViolation(f"sim_cos: {h.shape} vs {w.shape}")
    nh, nw = np.linalg.norm(h), np.linalg.norm(w)
    floored = int(nh < eps_norm) + int(nw < eps_norm)
    if floored and diagnostics is not None:
        diagnostics["norm_floor_events"] = diagnostics.get("norm_floor_events", 0) + floored
    s = float(np.clip(np.dot(h, w) / (max(nh, eps_norm) * max(nw, eps_norm)), -1.0, 1.0))
    assert -1.0 <= s <= 1.0
    return s


def sim_gauss(h: np.ndarray, w: np.ndarray, gamma: float = config.GAMMA) -> float:
    if h.shape != w.shape:
        raise ContractViolation(f"sim_gauss: {h.shape} vs {w.shape}")
    if gamma <= 0:
        raise ContractViolation("gamma must be positive")
    diff = h - w
    s = -gamma * float(np.dot(diff, diff))
    assert s <= 0.0
    return s


def squared_distances(h: np.ndarray, W: np.ndarray) -> np.ndarray:
    """N x K matrix of ||h_i - w_k||^2 from explicit differences."""
    out = np.empty((h.shape[0], W.shape[0]))
    for start in range(0, h.shape[0], _DIST_CHUNK):
        diff = h[start:start + _DIST_CHUNK, None, :] - W[None, :, :]
        out[start:start + _DIST_CHUNK] = np.einsum("nkh,nkh->nk", diff, diff)
    return out


def _cosine_matrix(h: np.ndarray, W: np.ndarray, eps_norm: float):
    nh_raw = np.linalg.norm(h, axis=1)
    nw_raw = np.linalg.norm(W, axis=1)
    nh = np.maximum(nh_raw, eps_norm)
    nw = np.maximum(nw_raw, eps_norm)
    S = np.clip((h @ W.T) / np.outer(nh, nw), -1.0, 1.0)
    assert np.all(np.abs(S) <= 1.0)
    return S, nh, nw, nh_raw < eps_norm, nw_raw < eps_norm


def similarity_matrix(h: np.ndarray, W: np.ndarray, variant: LossVariant,
                      gamma: float = config.GAMMA,
                      eps_norm: float = config.NORM_EPSILON) -> np.ndarray:
    variant = LossVariant(variant)
    if variant is LossVariant.COSINE:
        return _cosine_matrix(h, W, eps_norm)[0]
    if variant is LossVariant.GAUSSIAN:
        S = -gamma * squared_distances(h, W)
        assert np.all(S <= 0.0)
        return S
    return h @ W.T


# --- Helpers ---

def _check_batch(h: np.ndarray, labels: np.ndarray, W: np.ndarray):
    if h.ndim != 2 or W.ndim != 2 or h.shape[1] != W.shape[1]:
        raise ContractViolation(f"Latent batch {h.shape} and W {W.shape} disagree")
    if labels.shape != (h.shape[0],):
        raise ContractViolation(f"labels shape {labels.shape} != ({h.shape[0]},)")
    if labels.size and (labels.min() < 0 or labels.max() >= W.shape[0]):
        raise ContractViolation(f"labels must lie in [0, {W.shape[0]})")


def _reduce(per_sample: np.ndarray, reduction: str) -> Tuple[float, float]:
    """Total loss and the factor applied to every gradient."""
    if reduction not in REDUCTIONS:
        raise ConfigError(f"reduction must be one of {REDUCTIONS}")
    if reduction == "mean":
        n = max(per_sample.shape[0], 1)
        return float(per_sample.sum() / n), 1.0 / n
    return float(per_sample.sum()), 1.0


def _hardmax_wrong_class(S: np.ndarray, labels: np.ndarray) -> np.ndarray:
    """Index of the wrong class with the largest squared similarity (lowest index on ties)."""
    sq = S * S
    sq[np.arange(labels.size), labels] = -np.inf
    return row_argmax(sq)


# --- Loss variants ---

def loss_cce(h: np.ndarray, labels: np.ndarray, W: np.ndarray,
             reduction: str = config.REDUCTION) -> LossOutput:
    """-w_y.h + logsumexp_k(w_k.h), softmax gradient identity."""
    _check_batch(h, labels, W)
    logits = h @ W.T
    rows = np.arange(labels.size)
    per_sample = -logits[rows, labels] + logsumexp_rows(logits)
    loss, factor = _reduce(per_sample, reduction)

    G = (softmax_rows(logits) - one_hot(labels, W.shape[0])) * factor
    return LossOutput(loss=loss, dh=G @ W, dW=G.T @ h, predictions=row_argmax(logits),
                      per_sample=per_sample)


def loss_cosine_corel(h: np.ndarray, labels: np.ndarray, W: np.ndarray,
                      lam: float = config.DEFAULT_LAMBDA, reduction: str = config.REDUCTION,
                      eps_norm: float = config.NORM_EPSILON) -> LossOutput:
    """
    -lam * cos(h, w_y) + (1 - lam) * max_{k != y} cos(h, w_k)^2.
    Gradient flows through w_y and the single selected wrong class only.
    """
    _check_batch(h, labels, W)
    if W.shape[0] < 2:
        raise ConfigError("Cosine-COREL needs at least two classes for its repulsive term")
    if not 0.0 < lam <= 1.0:
        raise ConfigError(f"lambda must lie in (0, 1], got {lam}")

    S, nh, nw, h_floored, w_floored = _cosine_matrix(h, W, eps_norm)
    rows = np.arange(labels.size)
    wrong = _hardmax_wrong_class(S, labels)
    s_true, s_wrong = S[rows, labels], S[rows, wrong]
    per_sample = -lam * s_true + (1.0 - lam) * s_wrong ** 2
    loss, factor = _reduce(per_sample, reduction)

    # dL/dS is non-zero in two entries per row
    G = np.zeros_like(S)
    G[rows, labels] = -lam * factor
    G[rows, wrong] = 2.0 * (1.0 - lam) * s_wrong * factor

    # S = h.w / (|h| |w|): ds/dh = w/(|h||w|) - S h/|h|^2 (radial term absent when floored)
    A = G / np.outer(nh, nw)
    GS = G * S
    dh = A @ W - (GS.sum(axis=1) / nh ** 2 * ~h_floored)[:, None] * h
    dW = A.T @ h - (GS.sum(axis=0) / nw ** 2 * ~w_floored)[:, None] * W

    floor_events = int(h_floored.sum() + w_floored.sum())
    if floor_events:
        logger.warning(f"Cosine norm floor hit {floor_events} times in this batch")
    return LossOutput(loss=loss, dh=dh, dW=dW, predictions=row_argmax(S), per_sample=per_sample,
                      diagnostics={"norm_floor_events": floor_events})


def loss_gaussian_corel(h: np.ndarray, labels: np.ndarray, W: np.ndarray,
                        lam: float = config.DEFAULT_LAMBDA, gamma: float = config.GAMMA,
                        reduction: str = config.REDUCTION) -> LossOutput:
    """-lam * s_gau(h, w_y) + (1 - lam) * logsumexp_k s_gau(h, w_k), s_gau = -gamma ||h - w||^2."""
    _check_batch(h, labels, W)
    if not 0.0 < lam <= 1.0:
        raise ConfigError(f"lambda must lie in (0, 1], got {lam}")
    if gamma <= 0:
        raise ConfigError(f"gamma must be positive, got {gamma}")

    S = -gamma * squared_distances(h, W)
    rows = np.arange(labels.size)
    per_sample = -lam * S[rows, labels] + (1.0 - lam) * logsumexp_rows(S)
    loss, factor = _reduce(per_sample, reduction)

    G = ((1.0 - lam) * softmax_rows(S) - lam * one_hot(labels, W.shape[0])) * factor
    # ds_ik/dh_i = -2 gamma (h_i - w_k), ds_ik/dw_k = 2 gamma (h_i - w_k)
    dh = -2.0 * gamma * (G.sum(axis=1)[:, None] * h - G @ W)
    dW = 2.0 * gamma * (G.T @ h - G.sum(axis=0)[:, None] * W)
    return LossOutput(loss=loss, dh=dh, dW=dW, predictions=row_argmax(S), per_sample=per_sample)


def center_deltas(h: np.ndarray, labels: np.ndarray, centers: np.ndarray) -> np.ndarray:
    """Delta_k = sum_{i: y_i = k} (mu_k - h_i) / (1 + n_k); zero for absent classes."""
    k = centers.shape[0]
    counts = np.bincount(labels, minlength=k).astype(np.float64)
    sums = np.zeros_like(centers)
    np.add.at(sums, labels, h)
    return (counts[:, None] * centers - sums) / (1.0 + counts)[:, None]


def apply_center_update(centers: np.ndarray, deltas: np.ndarray, alpha: float) -> np.ndarray:
    return centers - alpha * deltas


def loss_center(h: np.ndarray, labels: np.ndarray, W: np.ndarray, centers: np.ndarray,
                lam: float = config.DEFAULT_LAMBDA, alpha: float = config.CENTER_ALPHA,
                reduction: str = config.REDUCTION) -> LossOutput:
    """
    CCE + (lam / 2) * sum ||h - mu_y||^2. Centers are not trained by the
    optimizer; the caller applies mu_k <- mu_k - alpha * Delta_k.
    """
    _check_batch(h, labels, W)
    if centers.shape != W.shape:
        raise ContractViolation(f"centers shape {centers.shape} != W shape {W.shape}")
    if lam < 0:
        raise ConfigError(f"center loss lambda must be >= 0, got {lam}")

    out = loss_cce(h, labels, W, reduction="sum")
    diff = h - centers[labels]
    per_sample = out.per_sample + 0.5 * lam * np.einsum("ij,ij->i", diff, diff)
    loss, factor = _reduce(per_sample, reduction)
    return LossOutput(
        loss=loss,
        dh=(out.dh + lam * diff) * factor,
        dW=out.dW * factor,
        predictions=out.predictions,
        per_sample=per_sample,
        center_deltas=center_deltas(h, labels, centers),
        diagnostics={"alpha": alpha},
    )


def compute_loss(loss_config: LossConfig, h: np.ndarray, labels: np.ndarray,
                 params: ClassParams) -> LossOutput:
    variant = loss_config.variant
    if variant is LossVariant.CCE:
        return loss_cce(h, labels, params.W, loss_config.reduction)
    if variant is LossVariant.CENTER:
        if params.centers is None:
            raise ContractViolation("Center loss needs class centers")
        return loss_center(h, labels, params.W, params.centers, loss_config.lam,
                           loss_config.alpha, loss_config.reduction)
    if variant is LossVariant.COSINE:
        return loss_cosine_corel(h, labels, params.W, loss_config.lam, loss_config.reduction,
                                 loss_config.eps_norm)
    return loss_gaussian_corel(h, labels, params.W, loss_config.lam, loss_config.gamma,
                               loss_config.reduction)


def ar_terms(variant: LossVariant, h: np.ndarray, labels: np.ndarray, W: np.ndarray,
             gamma: float = config.GAMMA,
             eps_norm: float = config.NORM_EPSILON) -> Tuple[np.ndarray, np.ndarray]:
    """Per-sample attractive and repulsive terms, evaluated one vector pair at a time."""
    variant = LossVariant(variant)
    attract = np.empty(labels.size)
    repulse = np.empty(labels.size)
    for i, (h_i, y_i) in enumerate(zip(h, labels)):
        if variant is LossVariant.COSINE:
            sims = [sim_cos(h_i, w, eps_norm) for w in W]
            attract[i] = sims[y_i]
            repulse[i] = max(s * s for k, s in enumerate(sims) if k != y_i)
        elif variant is LossVariant.GAUSSIAN:
            sims = np.array([sim_gauss(h_i, w, gamma) for w in W])
            attract[i] = sims[y_i]
            repulse[i] = logsumexp_rows(sims[None, :])[0]
        elif variant is LossVariant.CCE:
            sims = np.array([sim_dot(h_i, w) for w in W])
            attract[i] = sims[y_i]
            repulse[i] = logsumexp_rows(sims[None, :])[0]
        else:
            raise ConfigError("Center loss is a regularized CCE, not an AR pair")
    return attract, repulse


def cosine_softmax_ceiling(k: int) -> float:
    """Largest probability softmax can put on one class over cosine similarities: e^2/(e^2 + K - 1)."""
    if k < 2:
        raise ContractViolation("ceiling needs K >= 2")
    e2 = np.exp(2.0)
    return float(e2 / (e2 + k - 1))


def predict(h: np.ndarray, W: np.ndarray, variant: LossVariant,
            gamma: float = config.GAMMA, eps_norm: float = config.NORM_EPSILON) -> np.ndarray:
    """Most similar class under the variant's similarity; lowest index on ties."""
    if h.ndim != 2 or h.shape[1] != W.shape[1]:
        raise ContractViolation(f"Latent batch {h.shape} and W {W.shape} disagree")
    variant = LossVariant(variant)
    if variant is LossVariant.CENTER:
        variant = LossVariant.CCE
    return row_argmax(similarity_matrix(h, W, variant, gamma, eps_norm))
