"""
AR Classifier
A trained model: representation network F_theta, class parameters W (and
centers) and the loss configuration deciding the similarity used at inference.
"""

from dataclasses import dataclass
from typing import Any, Dict, Optional

import numpy as np

from src.losses import ClassParams, LossConfig, LossVariant, predict
from src.models import network
from src.models.network import NetworkState
from src.utils.exceptions import ConfigError, ContractViolation
from src.utils.logger import get_logger

logger = get_logger(__name__)


@dataclass
class ARClassifier:
    net: NetworkState
    params: ClassParams
    loss_config: LossConfig

    def copy(self) -> "ARClassifier":
        return ARClassifier(self.net.copy(), self.params.copy(), self.loss_config)

    def latents(self, x: np.ndarray) -> np.ndarray:
        return network.latents(self.net, x)

    def predict(self, x: np.ndarray) -> np.ndarray:
        """Most similar class for each input row"""
        if x.shape[0] == 0:
            return np.zeros(0, dtype=np.int64)
        return predict(self.latents(x), self.params.W, self.loss_config.variant,
                       self.loss_config.gamma, self.loss_config.eps_norm)

    def accuracy(self, x: np.ndarray, y: np.ndarray) -> float:
        if y.size == 0:
            raise ContractViolation("Cannot score an empty split")
        return float(np.mean(self.predict(x) == y))

    def trainable(self) -> Dict[str, np.ndarray]:
        """Parameters the optimizer updates: theta plus W (centers excluded)."""
        return {**self.net.parameters(), "W": self.params.W}

    def with_trainable(self, values: Dict[str, np.ndarray]) -> "ARClassifier":
        return ARClassifier(self.net.with_parameters(values),
                            ClassParams(values["W"], self.params.centers), self.loss_config)

    def save(self, path: str, metadata: Optional[Dict[str, Any]] = None):
        arrays = {"W": self.params.W}
        if self.params.centers is not None:
            arrays["centers"] = self.params.centers
        network.save_checkpoint(path, self.net, arrays,
                                {**(metadata or {}), "loss_config": self.loss_config.to_dict()})

    @classmethod
    def load(cls, path: str) -> "ARClassifier":
        ckpt = network.load_checkpoint(path)
        if "W" not in ckpt.arrays or "loss_config" not in ckpt.metadata:
            raise ConfigError(f"{path} holds no classifier head")
        loss_config = LossConfig(**ckpt.metadata["loss_config"])
        W = ckpt.arrays["W"]
        if W.ndim != 2 or W.shape[1] != ckpt.state.latent_dim:
            raise ConfigError(f"W shape {W.shape} does not match latent dim {ckpt.state.latent_dim}")
        centers = ckpt.arrays.get("centers")
        if loss_config.variant is LossVariant.CENTER and centers is None:
            raise ConfigError("Center-loss checkpoint is missing its centers")
        logger.info(f"Loaded {loss_config.variant.value} classifier from {path}")
        return cls(ckpt.state, ClassParams(W, centers), loss_config)
