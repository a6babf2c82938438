"""Training losses: cross-entropy, knowledge distillation, EWC penalty."""

from __future__ import annotations

from typing import Callable, Mapping

import numpy as np

from .engine.tensor import Parameter, Tensor


def _as_label_array(labels, n_classes: int, batch: int) -> np.ndarray:
    lab = np.atleast_1d(np.asarray(labels, dtype=np.int64))
    if lab.shape != (batch,):
        raise ValueError(f"labels shape {lab.shape} does not match batch {batch}")
    if lab.min() < 0 or lab.max() >= n_classes:
        raise ValueError(f"label outside class range [0, {n_classes})")
    return lab


def cross_entropy(logits: Tensor, labels) -> Tensor:
    """Mean -log softmax(logits)[label]; accepts [C] or [B, C] logits."""
    squeeze = logits.data.ndim == 1
    z = logits.reshape(1, -1) if squeeze else logits
    b, c = z.shape
    lab = _as_label_array(labels, c, b)
    onehot = Tensor(np.eye(c, dtype=z.data.dtype)[lab], dtype=z.data.dtype)
    return -(onehot * z.log_softmax(axis=-1)).sum() / float(b)


def kd_loss(teacher_logits, student_logits: Tensor, tau: float = 2.0) -> Tensor:
    """Soft cross-entropy between temperature-softened teacher and student.

    Mean over the batch of -sum_i softmax(v/tau)_i log softmax(z/tau)_i.
    The teacher side is a constant: gradients flow into the student only.
    """
    if tau <= 0:
        raise ValueError(f"temperature must be positive, got {tau}")
    v = teacher_logits.data if isinstance(teacher_logits, Tensor) else np.asarray(teacher_logits)
    squeeze = student_logits.data.ndim == 1
    z = student_logits.reshape(1, -1) if squeeze else student_logits
    v = np.atleast_2d(v)
    if v.shape != z.shape:
        raise ValueError(f"teacher logits {v.shape} do not match student {z.shape}")
    vt = v.astype(np.float64) / tau
    vt -= vt.max(axis=-1, keepdims=True)
    soft = np.exp(vt)
    soft /= soft.sum(axis=-1, keepdims=True)
    target = Tensor(soft, dtype=z.data.dtype)
    return -(target * (z / float(tau)).log_softmax(axis=-1)).sum() / float(z.shape[0])


def estimate_fisher(forward_logits: Callable[[np.ndarray], Tensor], images: np.ndarray,
                    labels: np.ndarray, params: Mapping[str, Parameter],
                    max_samples: int | None = None) -> dict[str, np.ndarray]:
    """Diagonal Fisher: mean squared per-sample gradient of the log-likelihood.

    Uses the observed labels (empirical Fisher).  Only trainable parameters
    are scored.
    """
    n = len(images)
    if n == 0:
        raise ValueError("Fisher estimation needs at least one sample")
    if max_samples is not None:
        n = min(n, max_samples)
    trainable = {name: p for name, p in params.items() if p.trainable}
    fisher = {name: np.zeros_like(p.data) for name, p in trainable.items()}
    for i in range(n):
        for p in trainable.values():
            p.zero_grad()
        logits = forward_logits(images[i:i + 1])
        loglik = -cross_entropy(logits, labels[i:i + 1])
        loglik.backward()
        for name, p in trainable.items():
            fisher[name] += p.grad ** 2
    for name in fisher:
        fisher[name] /= n
    return fisher


def ewc_penalty(params: Mapping[str, Parameter], anchor: Mapping[str, np.ndarray],
                fisher: Mapping[str, np.ndarray], lam: float) -> Tensor:
    """(lam / 2) sum_k F_k (theta_k - theta*_k)^2 over anchored parameters."""
    total = None
    for name, f in fisher.items():
        p = params[name]
        ref = anchor[name]
        if p.data.shape != ref.shape or p.data.shape != f.shape:
            raise ValueError(f"shape mismatch for {name!r} in EWC penalty")
        diff = p - Tensor(ref, dtype=p.data.dtype)
        term = (Tensor(f, dtype=p.data.dtype) * diff * diff).sum()
        total = term if total is None else total + term
    if total is None:
        raise ValueError("EWC penalty needs at least one anchored parameter")
    return total * (0.5 * lam)
