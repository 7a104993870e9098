"""
Adam Optimizer
Adaptive moment estimation with bias correction, as a pure step function over
named parameter dictionaries.
"""

from dataclasses import dataclass, field, replace
from typing import Dict, Tuple

import numpy as np

import config
from src.linalg import add, hadamard, scale, sub
from src.utils.exceptions import ContractViolation, NonFiniteGradientError
from src.utils.logger import get_logger

logger = get_logger(__name__)


@dataclass(frozen=True)
class AdamState:
    lr: float = config.LEARNING_RATE
    beta1: float = config.ADAM["beta1"]
    beta2: float = config.ADAM["beta2"]
    eps: float = config.ADAM["eps"]
    t: int = 0
    m: Dict[str, np.ndarray] = field(default_factory=dict)
    v: Dict[str, np.ndarray] = field(default_factory=dict)

    def hyperparameters(self) -> Dict[str, float]:
        return {"lr": self.lr, "beta1": self.beta1, "beta2": self.beta2, "eps": self.eps}


def init_adam(params: Dict[str, np.ndarray], lr: float = config.LEARNING_RATE,
              beta1: float = config.ADAM["beta1"], beta2: float = config.ADAM["beta2"],
              eps: float = config.ADAM["eps"]) -> AdamState:
    if lr <= 0:
        raise ContractViolation(f"learning rate must be positive, got {lr}")
    return AdamState(
        lr=lr, beta1=beta1, beta2=beta2, eps=eps, t=0,
        m={name: np.zeros_like(p) for name, p in params.items()},
        v={name: np.zeros_like(p) for name, p in params.items()},
    )


def adam_step(params: Dict[str, np.ndarray], grads: Dict[str, np.ndarray],
              state: AdamState) -> Tuple[Dict[str, np.ndarray], AdamState]:
    """
    One Adam update. Returns new parameter and state objects; inputs are left untouched.
    A non-finite gradient aborts the step before anything is computed.
    """
    if state.lr <= 0:
        raise ContractViolation(f"learning rate must be positive, got {state.lr}")
    for name, p in params.items():
        g = grads.get(name)
        if g is None or g.shape != p.shape:
            raise ContractViolation(f"Gradient for '{name}' missing or mis-shaped")
        if not np.all(np.isfinite(g)):
            raise NonFiniteGradientError(f"Non-finite gradient for '{name}' at step {state.t + 1}")

    t = state.t + 1
    bc1 = 1.0 - state.beta1 ** t
    bc2 = 1.0 - state.beta2 ** t

    new_params, new_m, new_v = {}, {}, {}
    for name, p in params.items():
        g = grads[name]
        m = state.m.get(name, np.zeros_like(p))
        v = state.v.get(name, np.zeros_like(p))
        m = add(scale(m, state.beta1), scale(g, 1.0 - state.beta1))
        v = add(scale(v, state.beta2), scale(hadamard(g, g), 1.0 - state.beta2))
        m_hat = m / bc1
        v_hat = v / bc2
        new_params[name] = sub(p, scale(m_hat, state.lr) / (np.sqrt(v_hat) + state.eps))
        new_m[name], new_v[name] = m, v

    return new_params, replace(state, t=t, m=new_m, v=new_v)
