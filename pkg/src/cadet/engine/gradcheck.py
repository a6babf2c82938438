"""Central-difference verification of analytic gradients."""

from __future__ import annotations

from typing import Callable, Sequence

import numpy as np

from .rng import Rng
from .tensor import Parameter, Tensor


class GradCheckError(AssertionError):
    """Raised when the analytic/numeric mismatch exceeds the tolerance."""


def _rel_err(analytic: float, numric: float) -> float:
    return abs(analytic - numric) / max(1e-12, abs(analytic) + abs(numric))


def grad_check(fn: Callable[[], Tensor], params: Sequence[Parameter], eps: float = 1e-5,
               tol: float | None = None, max_coords_per_param: int = 50,
               rng: Rng | None = None) -> float:
    """Compare analytic gradients of ``fn()`` against central differences.

    ``fn`` must be deterministic and rebuild its graph from ``params`` on each
    call.  Runs in 64-bit only; float32 round-off would drown the signal.
    Returns the max relative error over the sampled coordinates, or raises
    GradCheckError naming the worst coordinate when ``tol`` is exceeded.
    """
    for p in params:
        if p.data.dtype != np.float64:
            raise TypeError(f"grad_check requires float64 parameters, {p.name!r} is {p.data.dtype}")
    rng = rng or Rng(0)

    for p in params:
        p.zero_grad()
    loss = fn()
    loss.backward()
    analytic = [p.grad.copy() for p in params]

    worst = (0.0, "", 0, 0.0, 0.0)  # (rel err, param name, flat index, analytic, numeric)
    for p, a_grad in zip(params, analytic):
        flat = p.data.reshape(-1)
        n = flat.size
        if n <= max_coords_per_param:
            coords = np.arange(n)
        else:
            coords = rng.choice(n, max_coords_per_param)
        for idx in coords:
            orig = flat[idx]
            flat[idx] = orig + eps
            up = fn().item()
            flat[idx] = orig - eps
            down = fn().item()
            flat[idx] = orig
            numeric = (up - down) / (2.0 * eps)
            err = _rel_err(float(a_grad.reshape(-1)[idx]), numeric)
            if err > worst[0]:
                worst = (err, p.name, int(idx), float(a_grad.reshape(-1)[idx]), numeric)
    if tol is not None and worst[0] > tol:
        raise GradCheckError(
            f"gradient mismatch {worst[0]:.3e} > tol {tol:.1e} at "
            f"parameter {worst[1]!r} coordinate {worst[2]}: "
            f"analytic {worst[3]:.6e} vs numeric {worst[4]:.6e}"
        )
    return worst[0]
