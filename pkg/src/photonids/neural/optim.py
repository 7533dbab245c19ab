"""Optimisers over a flat parameter vector."""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np


@dataclass
class AdamState:
    m: np.ndarray
    v: np.ndarray
    t: int = 0


def adam_init(params: np.ndarray) -> AdamState:
    return AdamState(np.zeros_like(params), np.zeros_like(params))


def adam_step(params: np.ndarray, grads: np.ndarray, state: AdamState, lr: float,
              beta1: float = 0.9, beta2: float = 0.999, eps: float = 1e-8) -> None:
    """In-place Adam update."""
    state.t += 1
    state.m *= beta1
    state.m += (1 - beta1) * grads
    state.v *= beta2
    state.v += (1 - beta2) * grads * grads
    c1 = 1 - beta1 ** state.t
    c2 = 1 - beta2 ** state.t
    step = (lr / c1) * state.m / (np.sqrt(state.v / c2) + eps)
    params -= step.astype(params.dtype, copy=False)


def sgd_step(params: np.ndarray, grads: np.ndarray, state, lr: float) -> None:
    params -= lr * grads


@dataclass
class Optimizer:
    name: str = "adam"
    lr: float = 1e-3
    state: AdamState | None = field(default=None, repr=False)

    def step(self, params, grads):
        if self.name == "adam":
            if self.state is None:
                self.state = adam_init(params)
            adam_step(params, grads, self.state, self.lr)
        elif self.name == "sgd":
            sgd_step(params, grads, None, self.lr)
        else:
            raise ValueError(f"unknown optimizer {self.name!r}")
