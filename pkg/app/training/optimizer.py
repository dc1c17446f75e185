"""Adam with bias correction."""

from dataclasses import dataclass, field
from typing import Dict

import numpy as np

from app.exceptions import ContractError
from app.tensor import ParamStore


@dataclass
class AdamState:
    step: int = 0
    first: Dict[str, np.ndarray] = field(default_factory=dict)
    second: Dict[str, np.ndarray] = field(default_factory=dict)


def adam_step(
    params: ParamStore,
    state: AdamState,
    lr: float,
    beta1: float = 0.9,
    beta2: float = 0.999,
    eps: float = 1e-8,
) -> None:
    """Apply one Adam update in place using each parameter's ``grad``.

    Raises:
        ContractError: If any parameter has no gradient. No parameter is
            updated in that case.
    """
    missing = [name for name, p in params.items() if p.grad is None]
    if missing:
        raise ContractError(f"{len(missing)} parameters have no gradient, e.g. {missing[:3]}")

    state.step += 1
    correction1 = 1.0 - beta1 ** state.step
    correction2 = 1.0 - beta2 ** state.step
    for name, p in params.items():
        g = p.grad.astype(np.float64)
        m = state.first.get(name)
        v = state.second.get(name)
        m = (1.0 - beta1) * g if m is None else beta1 * m + (1.0 - beta1) * g
        v = (1.0 - beta2) * g * g if v is None else beta2 * v + (1.0 - beta2) * g * g
        state.first[name], state.second[name] = m, v
        update = lr * (m / correction1) / (np.sqrt(v / correction2) + eps)
        p.data -= update.astype(p.data.dtype)


class AdamOptimizer:
    """Stateful wrapper over ``adam_step`` bound to one parameter store."""

    def __init__(self, params: ParamStore, lr: float = 1e-3, beta1: float = 0.9, beta2: float = 0.999, eps: float = 1e-8):
        if lr <= 0:
            raise ContractError(f"learning rate must be positive, got {lr}")
        self.params = params
        self.lr = lr
        self.beta1 = beta1
        self.beta2 = beta2
        self.eps = eps
        self.state = AdamState()

    def zero_grad(self) -> None:
        self.params.zero_grad()

    def step(self) -> None:
        adam_step(self.params, self.state, self.lr, self.beta1, self.beta2, self.eps)
