"""Incremental classifier heads and the prediction rule.

Class ids are global: 0 is the conart class, each completed session appends
its deepart class(es) after it.  A head covers a contiguous block of class
ids; full logits are the concatenation of per-head segments in class order.
Cosine heads emit similarities of normalized features and normalized weight
rows, so every logit lies in [-1, 1] and head magnitudes stay calibrated
across sessions.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .engine.rng import Rng
from .engine.tensor import Parameter, Tensor, concat

HEAD_KINDS = ("linear", "cosine")

CONART = -1
DEEPART = 1


@dataclass(frozen=True)
class StrategyConfig:
    """Knobs of the anti-forgetting recipe."""

    tau: float = 2.0            # distillation temperature
    lambda_kd: float = 1.0
    lambda_ewc: float = 100.0
    head_kind: str = "linear"
    tuning: str = "full-finetune"
    # cross-entropy/distillation on raw cosine logits (range [-1, 1]) has
    # vanishing gradients; losses see scale * logits, predictions never do
    cosine_scale: float = 16.0

    def __post_init__(self):
        if self.tau <= 0:
            raise ValueError(f"temperature must be positive, got {self.tau}")
        if self.lambda_kd < 0 or self.lambda_ewc < 0:
            raise ValueError("loss weights must be non-negative")
        if self.head_kind not in HEAD_KINDS:
            raise ValueError(f"unknown head kind {self.head_kind!r}")


@dataclass
class Prediction:
    class_id: int
    binary: int          # -1 conart, +1 deepart
    deepart_score: float


def cosine_logits(weight: Tensor, features: Tensor) -> Tensor:
    """Similarity of normalized features [B, d] and weight rows [C, d].

    Every output lies in [-1, 1].  Zero-norm rows or features are rejected:
    the similarity is undefined there and silently returning zeros would hide
    a dead classifier.
    """
    w_norms = np.sqrt((weight.data ** 2).sum(axis=1))
    if np.any(w_norms == 0.0):
        raise ValueError("cosine head has a zero-norm weight row")
    f_norms = np.sqrt((features.data ** 2).sum(axis=-1))
    if np.any(f_norms == 0.0):
        raise ValueError("cosine head received a zero-norm feature")
    wn = weight / weight.l2norm(axis=1, keepdims=True)
    fn = features / features.l2norm(axis=-1, keepdims=True)
    return fn @ wn.transpose((1, 0))


class ClassifierHead:
    """One head covering a contiguous block of class ids."""

    def __init__(self, kind: str, class_ids: list[int], dim: int, rng: Rng,
                 session: int, dtype=None):
        if kind not in HEAD_KINDS:
            raise ValueError(f"unknown head kind {kind!r}")
        self.kind = kind
        self.class_ids = list(class_ids)
        self.session = session
        c = len(class_ids)
        self.weight = Parameter(0.02 * rng.normal(c * dim).reshape(c, dim),
                                name=f"heads.s{session}.weight", dtype=dtype)
        self.bias = None
        if kind == "linear":
            self.bias = Parameter(np.zeros(c), name=f"heads.s{session}.bias", dtype=dtype)

    def logits(self, features: Tensor) -> Tensor:
        if self.kind == "cosine":
            return cosine_logits(self.weight, features)
        return features @ self.weight.transpose((1, 0)) + self.bias

    def named_params(self) -> dict[str, Parameter]:
        out = {self.weight.name: self.weight}
        if self.bias is not None:
            out[self.bias.name] = self.bias
        return out


class HeadStack:
    """All heads learned so far; grows by one head per session."""

    def __init__(self, kind: str, dim: int, dtype=None):
        if kind not in HEAD_KINDS:
            raise ValueError(f"unknown head kind {kind!r}")
        self.kind = kind
        self.dim = dim
        self.dtype = dtype
        self.heads: list[ClassifierHead] = []
        self._sessions: set[int] = set()

    @property
    def n_classes(self) -> int:
        return sum(len(h.class_ids) for h in self.heads)

    def add_head(self, session: int, n_new_classes: int, rng: Rng) -> ClassifierHead:
        """Register a session's head; the base session brings two classes."""
        if session in self._sessions:
            raise ValueError(f"session {session} already has a head")
        if n_new_classes <= 0:
            raise ValueError("a head must cover at least one class")
        start = self.n_classes
        head = ClassifierHead(self.kind, list(range(start, start + n_new_classes)),
                              self.dim, rng, session, dtype=self.dtype)
        self.heads.append(head)
        self._sessions.add(session)
        return head

    def logits(self, features: Tensor, upto: int | None = None) -> Tensor:
        """Concatenated per-head segments in class order.

        ``upto`` restricts to the first ``upto`` classes (distillation targets
        from a model that predates the newest heads).
        """
        if not self.heads:
            raise ValueError("no heads registered")
        parts = [h.logits(features) for h in self.heads]
        out = parts[0] if len(parts) == 1 else concat(parts, axis=-1)
        if upto is not None:
            out = out[..., :upto]
        return out

    def named_params(self) -> dict[str, Parameter]:
        out: dict[str, Parameter] = {}
        for h in self.heads:
            out.update(h.named_params())
        return out


def predict_batch(logits: np.ndarray, deepart_classes) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Vectorized prediction rule over [B, C] logits.

    Returns (class ids, binary labels in {-1, +1}, deepart scores).  Argmax
    ties break toward the lowest class id; the deepart score is the softmax
    mass on deepart classes.
    """
    if logits.ndim != 2 or logits.shape[1] == 0:
        raise ValueError("predict needs a non-empty [B, C] logit matrix")
    z = logits.astype(np.float64)
    yhat = np.argmax(z, axis=1)  # first occurrence wins ties: lowest class id
    deepart_classes = np.asarray(sorted(deepart_classes), dtype=np.int64)
    is_deep = np.isin(yhat, deepart_classes)
    binary = np.where(is_deep, DEEPART, CONART)
    e = np.exp(z - z.max(axis=1, keepdims=True))
    p = e / e.sum(axis=1, keepdims=True)
    score = p[:, deepart_classes].sum(axis=1)
    return yhat, binary, score


def predict(logits: np.ndarray, deepart_classes) -> Prediction:
    """Single-sample form of the prediction rule."""
    y, b, s = predict_batch(np.asarray(logits, dtype=np.float64)[None, :], deepart_classes)
    return Prediction(int(y[0]), int(b[0]), float(s[0]))
