from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Mapping

import numpy as np

from ..errors import ConfigurationError, DimensionError, UsageError
from .tensor import Tensor


@dataclass
class LrSchedule:
    """Step schedule: the rate halves once 60% and again once 90% of iterations are done."""

    base_lr: float
    total_iterations: int
    milestones: tuple[float, ...] = (0.6, 0.9)
    factor: float = 0.5

    def __post_init__(self):
        if self.base_lr <= 0 or self.total_iterations <= 0:
            raise ConfigurationError("learning rate and iteration count must be positive")

    def boundaries(self) -> list[int]:
        return [math.ceil(m * self.total_iterations) for m in self.milestones]

    def lr_at(self, iteration: int) -> float:
        if not 0 <= iteration < self.total_iterations:
            raise UsageError(f"iteration {iteration} outside [0, {self.total_iterations})")
        passed = sum(1 for b in self.boundaries() if iteration >= b)
        return self.base_lr * self.factor**passed


def lr_at(schedule: LrSchedule, iteration: int) -> float:
    return schedule.lr_at(iteration)


@dataclass
class AdamState:
    m: dict[str, np.ndarray] = field(default_factory=dict)
    v: dict[str, np.ndarray] = field(default_factory=dict)
    t: int = 0
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8


def adam_step(params: Mapping[str, Tensor], state: AdamState, lr: float) -> None:
    """One bias-corrected Adam update, in place, using each parameter's ``.grad``.

    Parameters without a gradient are treated as having a zero gradient.
    """
    state.t += 1
    b1, b2 = state.beta1, state.beta2
    c1 = 1.0 - b1**state.t
    c2 = 1.0 - b2**state.t
    for name, p in params.items():
        g = p.grad if p.grad is not None else np.zeros_like(p.data)
        if g.shape != p.shape:
            raise DimensionError(f"{name}: grad shape {g.shape} != param shape {p.shape}")
        m = state.m.get(name)
        if m is None:
            m = state.m[name] = np.zeros_like(p.data)
            state.v[name] = np.zeros_like(p.data)
        v = state.v[name]
        if m.shape != p.shape:
            raise DimensionError(f"{name}: optimizer state shape {m.shape} != param shape {p.shape}")
        m *= b1
        m += (1.0 - b1) * g
        v *= b2
        v += (1.0 - b2) * g * g
        update = lr * (m / c1) / (np.sqrt(v / c2) + state.eps)
        p.data -= update.astype(p.dtype, copy=False)


class Adam:
    """Thin stateful wrapper over :func:`adam_step`."""

    def __init__(self, params: Mapping[str, Tensor], beta1=0.9, beta2=0.999, eps=1e-8):
        self.params = dict(params)
        self.state = AdamState(beta1=beta1, beta2=beta2, eps=eps)

    def zero_grad(self) -> None:
        for p in self.params.values():
            p.grad = None

    def step(self, lr: float) -> None:
        adam_step(self.params, self.state, lr)
