"""
Representation Network F_theta
Feed-forward LeakyReLU stack with inverted dropout, exact manual backprop
and a JSON checkpoint container.
"""

import json
from dataclasses import dataclass, field
from typing import Any, Dict, List, Optional, Sequence

import numpy as np

import config
from src.linalg import hadamard, matmul, transpose
from src.utils.exceptions import ConfigError, ContractViolation
from src.utils.logger import get_logger

logger = get_logger(__name__)


@dataclass
class DenseLayer:
    weight: np.ndarray  # fan_out x fan_in
    bias: np.ndarray    # fan_out

    def copy(self) -> "DenseLayer":
        return DenseLayer(self.weight.copy(), self.bias.copy())


@dataclass
class NetworkState:
    layers: List[DenseLayer]
    slope: float = config.LEAKY_SLOPE
    dropout_rate: float = config.DROPOUT

    @property
    def input_dim(self) -> int:
        return self.layers[0].weight.shape[1]

    @property
    def latent_dim(self) -> int:
        return self.layers[-1].weight.shape[0]

    @property
    def layer_sizes(self) -> List[int]:
        return [self.input_dim] + [layer.weight.shape[0] for layer in self.layers]

    def copy(self) -> "NetworkState":
        return NetworkState([layer.copy() for layer in self.layers], self.slope, self.dropout_rate)

    def parameters(self) -> Dict[str, np.ndarray]:
        params = {}
        for i, layer in enumerate(self.layers):
            params[f"layer{i}.weight"] = layer.weight
            params[f"layer{i}.bias"] = layer.bias
        return params

    def with_parameters(self, params: Dict[str, np.ndarray]) -> "NetworkState":
        layers = [DenseLayer(params[f"layer{i}.weight"], params[f"layer{i}.bias"])
                  for i in range(len(self.layers))]
        return NetworkState(layers, self.slope, self.dropout_rate)

    def check_finite(self) -> bool:
        return all(np.all(np.isfinite(p)) for p in self.parameters().values())


@dataclass
class ForwardTrace:
    inputs: List[np.ndarray]           # input of each layer, after dropout
    pre_activations: List[np.ndarray]
    masks: List[Optional[np.ndarray]]  # scaled keep-masks, None in eval mode
    latent: np.ndarray
    training: bool = False


def glorot_uniform(fan_in: int, fan_out: int, rng: np.random.Generator) -> np.ndarray:
    limit = np.sqrt(6.0 / (fan_in + fan_out))
    return rng.uniform(-limit, limit, size=(fan_out, fan_in))


def init_network(layer_sizes: Sequence[int], slope: float = config.LEAKY_SLOPE,
                 dropout: float = config.DROPOUT,
                 rng: Optional[np.random.Generator] = None) -> NetworkState:
    """Glorot-uniform weights, zero biases. layer_sizes = [input, hidden..., latent]."""
    if rng is None:
        raise ContractViolation("init_network needs an rng")
    if len(layer_sizes) < 2 or any(int(s) < 1 for s in layer_sizes):
        raise ContractViolation(f"Need an input size and at least one positive layer: {layer_sizes}")
    if not 0.0 <= dropout < 1.0:
        raise ContractViolation(f"dropout must be in [0, 1), got {dropout}")
    layers = [
        DenseLayer(glorot_uniform(fan_in, fan_out, rng), np.zeros(fan_out))
        for fan_in, fan_out in zip(layer_sizes[:-1], layer_sizes[1:])
    ]
    return NetworkState(layers, float(slope), float(dropout))


def _leaky_relu(z: np.ndarray, slope: float) -> np.ndarray:
    return np.where(z > 0, z, slope * z)


def forward(state: NetworkState, x: np.ndarray, training: bool = False,
            rng: Optional[np.random.Generator] = None) -> ForwardTrace:
    """Affine -> LeakyReLU per layer; inverted dropout on each layer input when training."""
    if x.ndim != 2 or x.shape[1] != state.input_dim:
        raise ContractViolation(f"Input of shape {x.shape} does not fit fan-in {state.input_dim}")
    use_dropout = training and state.dropout_rate > 0
    if use_dropout and rng is None:
        raise ContractViolation("Training-mode dropout needs an rng")

    keep = 1.0 - state.dropout_rate
    inputs, pre, masks = [], [], []
    a = x
    for layer in state.layers:
        mask = None
        if use_dropout:
            mask = (rng.random(a.shape) < keep) / keep
            a = hadamard(a, mask)
        z = matmul(a, transpose(layer.weight)) + layer.bias
        inputs.append(a)
        pre.append(z)
        masks.append(mask)
        a = _leaky_relu(z, state.slope)
    return ForwardTrace(inputs, pre, masks, a, training)


def backward(state: NetworkState, trace: ForwardTrace, dl_dh: np.ndarray) -> Dict[str, np.ndarray]:
    """Gradients of the scalar loss for every weight and bias, given dL/dh."""
    if trace is None:
        raise ContractViolation("backward needs the forward trace")
    if dl_dh.shape != trace.latent.shape:
        raise ContractViolation(f"dL/dh shape {dl_dh.shape} != latent shape {trace.latent.shape}")

    grads = {}
    upstream = dl_dh
    for i in reversed(range(len(state.layers))):
        z = trace.pre_activations[i]
        delta = hadamard(upstream, np.where(z > 0, 1.0, state.slope))
        grads[f"layer{i}.weight"] = matmul(transpose(delta), trace.inputs[i])
        grads[f"layer{i}.bias"] = delta.sum(axis=0)
        if i > 0:
            upstream = matmul(delta, state.layers[i].weight)
            if trace.masks[i] is not None:
                upstream = hadamard(upstream, trace.masks[i])
    return grads


def latents(state: NetworkState, x: np.ndarray) -> np.ndarray:
    """Eval-mode latent batch."""
    return forward(state, x, training=False).latent


# --- Checkpoint container ---

@dataclass
class Checkpoint:
    state: NetworkState
    arrays: Dict[str, np.ndarray] = field(default_factory=dict)
    metadata: Dict[str, Any] = field(default_factory=dict)


def checkpoint_payload(state: NetworkState, arrays: Optional[Dict[str, np.ndarray]] = None,
                       metadata: Optional[Dict[str, Any]] = None) -> Dict[str, Any]:
    return {
        "format": config.CHECKPOINT_FORMAT,
        "version": config.CHECKPOINT_VERSION,
        "network": {
            "layer_sizes": state.layer_sizes,
            "slope": state.slope,
            "dropout_rate": state.dropout_rate,
            "layers": [{"weight": layer.weight.tolist(), "bias": layer.bias.tolist()}
                       for layer in state.layers],
        },
        "arrays": {name: np.asarray(value, dtype=np.float64).tolist()
                   for name, value in sorted((arrays or {}).items())},
        "metadata": metadata or {},
    }


def save_checkpoint(path: str, state: NetworkState, arrays: Optional[Dict[str, np.ndarray]] = None,
                    metadata: Optional[Dict[str, Any]] = None):
    """JSON floats use the shortest round-trip repr, so parameters restore bit-exactly."""
    payload = checkpoint_payload(state, arrays, metadata)
    with open(path, "w", encoding="utf-8", newline="\n") as f:
        json.dump(payload, f, sort_keys=True)
        f.write("\n")
    logger.info(f"Checkpoint written to {path}")


def load_checkpoint(path: str) -> Checkpoint:
    with open(path, "r", encoding="utf-8") as f:
        payload = json.load(f)
    if payload.get("format") != config.CHECKPOINT_FORMAT:
        raise ConfigError(f"{path} is not a checkpoint file")
    if payload.get("version") != config.CHECKPOINT_VERSION:
        raise ConfigError(f"Unsupported checkpoint version {payload.get('version')}")

    net = payload["network"]
    layers = [DenseLayer(np.array(layer["weight"], dtype=np.float64),
                         np.array(layer["bias"], dtype=np.float64))
              for layer in net["layers"]]
    state = NetworkState(layers, float(net["slope"]), float(net["dropout_rate"]))
    if state.layer_sizes != list(net["layer_sizes"]):
        raise ConfigError(f"Checkpoint layer shapes {state.layer_sizes} disagree with header")
    arrays = {name: np.array(value, dtype=np.float64) for name, value in payload["arrays"].items()}
    return Checkpoint(state, arrays, payload.get("metadata", {}))
