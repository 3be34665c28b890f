"""Adam with bias correction."""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from ..errors import UsageError
from .tensor import Tensor


@dataclass
class AdamState:
    first_moment: np.ndarray
    second_moment: np.ndarray
    step_count: int = 0
    lr: float = 1e-4
    beta1: float = 0.9
    beta2: float = 0.999
    epsilon: float = 1e-8

    @classmethod
    def for_param(cls, param: Tensor, **hyper) -> "AdamState":
        return cls(np.zeros_like(param.data), np.zeros_like(param.data), **hyper)


def adam_step(param: Tensor, state: AdamState) -> None:
    """Apply one Adam update to ``param`` in place and zero its gradient."""
    if param.grad is None:
        raise UsageError(f"adam_step on {param.name or 'parameter'} without a gradient")
    g = param.grad
    state.step_count += 1
    t = state.step_count
    state.first_moment *= state.beta1
    state.first_moment += (1.0 - state.beta1) * g
    state.second_moment *= state.beta2
    state.second_moment += (1.0 - state.beta2) * g * g
    m_hat = state.first_moment / (1.0 - state.beta1**t)
    v_hat = state.second_moment / (1.0 - state.beta2**t)
    param.data -= state.lr * m_hat / (np.sqrt(v_hat) + state.epsilon)
    param.grad = np.zeros_like(param.data)


@dataclass
class Adam:
    """Adam over a name -> parameter mapping.

    Parameters that received no gradient since the last step are skipped, so
    disabled sub-networks keep their moments untouched.
    """

    params: dict
    lr: float = 1e-4
    beta1: float = 0.9
    beta2: float = 0.999
    epsilon: float = 1e-8
    states: dict = field(default_factory=dict)

    def __post_init__(self):
        for name, p in self.params.items():
            if name not in self.states:
                self.states[name] = AdamState.for_param(
                    p, lr=self.lr, beta1=self.beta1, beta2=self.beta2, epsilon=self.epsilon
                )

    def zero_grad(self) -> None:
        for p in self.params.values():
            p.grad = None

    def step(self) -> None:
        for name, p in self.params.items():
            if p.grad is not None:
                adam_step(p, self.states[name])
        self.zero_grad()

    def set_lr(self, lr: float) -> None:
        self.lr = lr
        for s in self.states.values():
            s.lr = lr
