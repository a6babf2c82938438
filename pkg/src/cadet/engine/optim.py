"""SGD with momentum and the cosine learning-rate schedule."""

from __future__ import annotations

import math
from typing import Iterable

import numpy as np

from .tensor import Parameter


def cosine_anneal_lr(lr0: float, t: int, T: int) -> float:
    """lr0 * (1 + cos(pi t / T)) / 2, monotone non-increasing on [0, T]."""
    if T <= 0:
        raise ValueError(f"horizon must be positive, got {T}")
    if t < 0 or t > T:
        raise ValueError(f"step {t} outside schedule horizon [0, {T}]")
    return lr0 * 0.5 * (1.0 + math.cos(math.pi * t / T))


class SgdMomentum:
    """Momentum SGD over a parameter list.

    Update: v <- mu * v + g;  w <- w - lr * v.  Non-trainable parameters are
    skipped entirely, so a frozen weight is bit-identical across any number of
    steps.  Carries the schedule state (lr0, step, horizon) so callers can ask
    for the annealed rate.
    """

    def __init__(self, params: Iterable[Parameter], lr0: float, momentum: float = 0.9,
                 total_steps: int = 1):
        if not 0.0 <= momentum < 1.0:
            raise ValueError(f"momentum must be in [0, 1), got {momentum}")
        self.params = list(params)
        self.lr0 = float(lr0)
        self.momentum = float(momentum)
        self.t = 0
        self.total_steps = int(total_steps)
        self.velocity = [np.zeros_like(p.data) for p in self.params]

    def zero_grad(self):
        for p in self.params:
            p.zero_grad()

    def current_lr(self) -> float:
        return cosine_anneal_lr(self.lr0, self.t, self.total_steps)

    def step(self, lr: float | None = None):
        """Apply one update at the given rate (annealed rate when omitted)."""
        if lr is None:
            lr = self.current_lr()
        if lr <= 0.0:
            raise ValueError(f"learning rate must be positive, got {lr}")
        for p, v in zip(self.params, self.velocity):
            if not p.trainable:
                continue
            v *= self.momentum
            v += p.grad
            p.data -= lr * v
        self.t += 1
