"""
Training Loop
Mini-batch Adam training of F_theta and W under any AR loss variant, with
validation-selected checkpointing.
"""

from dataclasses import dataclass, field
from typing import Any, Dict, List, Optional, Tuple

import numpy as np

import config
from src.data import Dataset
from src.losses import (LossConfig, LossOutput, LossVariant, apply_center_update, compute_loss,
                        init_class_params, ClassParams)
from src.models import network
from src.models.ar_classifier import ARClassifier
from src.models.network import NetworkState
from src.optimizer import AdamState, adam_step, init_adam
from src.utils.exceptions import ContractViolation, DivergenceError, NonFiniteGradientError
from src.utils.logger import get_logger

logger = get_logger(__name__)


@dataclass
class EpochRecord:
    epoch: int
    train_loss: float
    train_accuracy: float
    val_accuracy: float


@dataclass
class TrainReport:
    history: List[EpochRecord]
    best_epoch: Optional[int]
    best_val_accuracy: Optional[float]
    test_accuracy: Optional[float]
    best_model: ARClassifier
    steps: int = 0
    diverged: bool = False
    failure: Optional[str] = None
    metadata: Dict[str, Any] = field(default_factory=dict)

    def to_dict(self) -> Dict[str, Any]:
        return {
            "history": [vars(record) for record in self.history],
            "best_epoch": self.best_epoch,
            "best_val_accuracy": self.best_val_accuracy,
            "test_accuracy": self.test_accuracy,
            "steps": self.steps,
            "diverged": self.diverged,
            "failure": self.failure,
            "metadata": self.metadata,
        }


def build_model(net: NetworkState, k: int, loss_config: LossConfig,
                rng: np.random.Generator, params: Optional[ClassParams] = None) -> ARClassifier:
    if params is None:
        params = init_class_params(k, net.latent_dim, rng,
                                   with_centers=loss_config.variant is LossVariant.CENTER)
    return ARClassifier(net, params, loss_config)


def train_step(model: ARClassifier, adam: AdamState, x: np.ndarray, y: np.ndarray,
               rng: Optional[np.random.Generator] = None,
               training: bool = True) -> Tuple[ARClassifier, AdamState, LossOutput]:
    """forward -> loss -> backward -> Adam on theta and W -> center update."""
    trace = network.forward(model.net, x, training=training, rng=rng)
    out = compute_loss(model.loss_config, trace.latent, y, model.params)
    if not np.isfinite(out.loss):
        raise DivergenceError(f"Loss became {out.loss} at step {adam.t + 1}")

    grads = network.backward(model.net, trace, out.dh)
    grads["W"] = out.dW
    values, adam = adam_step(model.trainable(), grads, adam)
    updated = model.with_trainable(values)
    if out.center_deltas is not None:
        updated.params.centers = apply_center_update(
            model.params.centers, out.center_deltas, model.loss_config.alpha)
    return updated, adam, out


def train(dataset: Dataset, net: NetworkState, loss_config: LossConfig,
          epochs: int = config.EPOCHS, batch_size: int = config.BATCH_SIZE,
          lr: float = config.LEARNING_RATE, rng: Optional[np.random.Generator] = None,
          class_params: Optional[ClassParams] = None) -> TrainReport:
    """
    Train for `epochs` passes over the shuffled training split and keep the
    parameters of the epoch with the best validation accuracy.
    Deterministic for a given rng state.
    """
    if rng is None:
        raise ContractViolation("train needs an rng")
    if batch_size < 1 or epochs < 0:
        raise ContractViolation(f"Need batch_size >= 1 and epochs >= 0, got {batch_size}, {epochs}")
    sizes = dataset.split_sizes()
    if sizes["train"] == 0 or sizes["val"] == 0:
        raise ContractViolation(f"Train and validation splits must be non-empty: {sizes}")
    if net.input_dim != dataset.dim:
        raise ContractViolation(f"Network fan-in {net.input_dim} != data dimension {dataset.dim}")

    model = build_model(net, dataset.k, loss_config, rng, class_params)
    adam = init_adam(model.trainable(), lr=lr)
    x_val, y_val = dataset.subset("val")

    history: List[EpochRecord] = []
    best_model, best_epoch, best_val = model.copy(), None, None
    diverged, failure = False, None

    logger.info(f"Training {loss_config.variant.value} for {epochs} epochs "
                f"(batch {batch_size}, lr {lr}, splits {sizes})")
    for epoch in range(epochs):
        order = rng.permutation(dataset.train_idx)
        loss_sum, correct = 0.0, 0
        try:
            for start in range(0, order.size, batch_size):
                batch = order[start:start + batch_size]
                x, y = dataset.x[batch], dataset.y[batch]
                model, adam, out = train_step(model, adam, x, y, rng, training=True)
                loss_sum += out.per_sample.sum()
                correct += int(np.sum(out.predictions == y))
        except (DivergenceError, NonFiniteGradientError) as e:
            logger.error(f"Training halted in epoch {epoch}: {e}")
            diverged, failure = True, str(e)
            break

        record = EpochRecord(
            epoch=epoch,
            train_loss=float(loss_sum / order.size),
            train_accuracy=correct / order.size,
            val_accuracy=model.accuracy(x_val, y_val),
        )
        history.append(record)
        if best_val is None or record.val_accuracy > best_val:
            best_model, best_epoch, best_val = model.copy(), epoch, record.val_accuracy
        logger.info(f"epoch {epoch}: loss {record.train_loss:.5f} "
                    f"train acc {record.train_accuracy:.4f} val acc {record.val_accuracy:.4f}")

    test_accuracy = None
    if sizes["test"]:
        test_accuracy = best_model.accuracy(*dataset.subset("test"))
    logger.info(f"Best epoch {best_epoch} (val acc {best_val}), test acc {test_accuracy}")

    return TrainReport(
        history=history,
        best_epoch=best_epoch,
        best_val_accuracy=best_val,
        test_accuracy=test_accuracy,
        best_model=best_model,
        steps=adam.t,
        diverged=diverged,
        failure=failure,
        metadata={
            "loss_config": loss_config.to_dict(),
            "optimizer": {"name": "adam", **adam.hyperparameters()},
            "epochs": epochs,
            "batch_size": batch_size,
            "layer_sizes": net.layer_sizes,
            "slope": net.slope,
            "dropout_rate": net.dropout_rate,
            "weight_init": "glorot_uniform",
            "bias_init": "zeros",
            "center_init": "zeros",
            "input_scaling": dataset.metadata.get("pixel_scaling", "none"),
            "dataset": dataset.name,
            "split_sizes": sizes,
        },
    )
