"""Dense tensors with define-by-run reverse-mode automatic differentiation.

The graph is rebuilt on every forward pass: each op returns a new Tensor
holding references to its parents and a closure that routes the output
gradient back to them.  ``backward()`` on a scalar topologically sorts the
graph and runs the closures in reverse.  Everything is backed by contiguous
numpy arrays in a single precision chosen per run (float32 for training,
float64 for gradient checks and metric oracles).
"""

from __future__ import annotations

import math
from typing import Iterable, Sequence

import numpy as np

DTYPES = {"f32": np.float32, "f64": np.float64}

_default_dtype = np.float32
_grad_enabled = True
_debug_checks = False

_GELU_C = math.sqrt(2.0 / math.pi)


def set_default_dtype(name: str):
    """Select run precision: 'f32' or 'f64'."""
    global _default_dtype
    if name not in DTYPES:
        raise ValueError(f"unknown precision {name!r}, expected one of {sorted(DTYPES)}")
    _default_dtype = DTYPES[name]


def default_dtype():
    return _default_dtype


def set_debug_checks(on: bool):
    """Verify every op output is finite (debug builds only; slows training)."""
    global _debug_checks
    _debug_checks = bool(on)


class autograd_off:
    """Context manager that skips graph recording (evaluation passes)."""

    def __enter__(self):
        global _grad_enabled
        self._prev = _grad_enabled
        _grad_enabled = False
        return self

    def __exit__(self, *exc):
        global _grad_enabled
        _grad_enabled = self._prev
        return False


class Tensor:
    __slots__ = ("data", "grad", "requires_grad", "_parents", "_grad_fn")

    def __init__(self, data, requires_grad: bool = False, dtype=None):
        dt = dtype if dtype is not None else _default_dtype
        self.data = np.asarray(data, dtype=dt)
        self.grad = None
        self.requires_grad = bool(requires_grad) and _grad_enabled
        self._parents = ()
        self._grad_fn = None

    # -- construction helpers ------------------------------------------------

    @classmethod
    def _from_op(cls, data: np.ndarray, parents: tuple, grad_fn):
        out = cls.__new__(cls)
        out.data = data
        out.grad = None
        if _grad_enabled and any(p.requires_grad for p in parents):
            out.requires_grad = True
            out._parents = parents
            out._grad_fn = grad_fn
        else:
            out.requires_grad = False
            out._parents = ()
            out._grad_fn = None
        if _debug_checks and not np.all(np.isfinite(data)):
            raise FloatingPointError("non-finite value produced by engine op")
        return out

    def _coerce(self, other) -> "Tensor":
        if isinstance(other, Tensor):
            if other.data.dtype != self.data.dtype:
                raise TypeError(
                    f"mixed dtypes in op: {self.data.dtype} vs {other.data.dtype}"
                )
            return other
        return Tensor(np.asarray(other, dtype=self.data.dtype))

    # -- bookkeeping ---------------------------------------------------------

    @property
    def shape(self):
        return self.data.shape

    @property
    def ndim(self):
        return self.data.ndim

    @property
    def size(self):
        return self.data.size

    @property
    def dtype(self):
        return self.data.dtype

    def item(self) -> float:
        return float(self.data.reshape(-1)[0])

    def numpy(self) -> np.ndarray:
        return self.data

    def detach(self) -> "Tensor":
        return Tensor(self.data, dtype=self.data.dtype)

    def __repr__(self):
        return f"Tensor(shape={self.data.shape}, dtype={self.data.dtype}, requires_grad={self.requires_grad})"

    def _accumulate(self, contribution: np.ndarray):
        # first write copies (the contribution may alias an upstream buffer);
        # later writes add in place
        if self.grad is None:
            self.grad = np.array(contribution, dtype=self.data.dtype)
        else:
            self.grad += contribution

    def backward(self):
        """Populate gradients of every reachable tensor that requires grad."""
        if self.data.size != 1:
            raise ValueError(f"backward requires a scalar loss, got shape {self.data.shape}")
        if not self.requires_grad:
            raise RuntimeError(
                "backward on a tensor detached from any differentiable graph; "
                "no parameter with requires_grad reaches this value"
            )
        topo: list[Tensor] = []
        visited: set[int] = set()
        stack: list[tuple[Tensor, bool]] = [(self, False)]
        while stack:
            node, processed = stack.pop()
            if processed:
                topo.append(node)
                continue
            if id(node) in visited:
                continue
            visited.add(id(node))
            stack.append((node, True))
            for p in node._parents:
                if p.requires_grad and id(p) not in visited:
                    stack.append((p, False))
        self._accumulate(np.ones_like(self.data))
        for node in reversed(topo):
            if node._grad_fn is not None:
                node._grad_fn(node.grad)

    # -- arithmetic ------------------------------------------------------------

    def __add__(self, other):
        other = self._coerce(other)
        a, b = self, other

        def grad_fn(g):
            if a.requires_grad:
                a._accumulate(_unbroadcast(g, a.data.shape))
            if b.requires_grad:
                b._accumulate(_unbroadcast(g, b.data.shape))

        return Tensor._from_op(a.data + b.data, (a, b), grad_fn)

    __radd__ = __add__

    def __neg__(self):
        a = self

        def grad_fn(g):
            a._accumulate(-g)

        return Tensor._from_op(-a.data, (a,), grad_fn)

    def __sub__(self, other):
        other = self._coerce(other)
        a, b = self, other

        def grad_fn(g):
            if a.requires_grad:
                a._accumulate(_unbroadcast(g, a.data.shape))
            if b.requires_grad:
                b._accumulate(_unbroadcast(-g, b.data.shape))

        return Tensor._from_op(a.data - b.data, (a, b), grad_fn)

    def __rsub__(self, other):
        return self._coerce(other).__sub__(self)

    def __mul__(self, other):
        other = self._coerce(other)
        a, b = self, other

        def grad_fn(g):
            if a.requires_grad:
                a._accumulate(_unbroadcast(g * b.data, a.data.shape))
            if b.requires_grad:
                b._accumulate(_unbroadcast(g * a.data, b.data.shape))

        return Tensor._from_op(a.data * b.data, (a, b), grad_fn)

    __rmul__ = __mul__

    def __truediv__(self, other):
        other = self._coerce(other)
        a, b = self, other

        def grad_fn(g):
            if a.requires_grad:
                a._accumulate(_unbroadcast(g / b.data, a.data.shape))
            if b.requires_grad:
                b._accumulate(_unbroadcast(-g * a.data / (b.data * b.data), b.data.shape))

        return Tensor._from_op(a.data / b.data, (a, b), grad_fn)

    def __rtruediv__(self, other):
        return self._coerce(other).__truediv__(self)

    def __pow__(self, exponent):
        if not isinstance(exponent, (int, float)):
            raise TypeError("only scalar exponents are supported")
        a, s = self, float(exponent)

        def grad_fn(g):
            a._accumulate(g * s * a.data ** (s - 1.0))

        return Tensor._from_op(a.data ** s, (a,), grad_fn)

    def __matmul__(self, other):
        other = self._coerce(other)
        a, b = self, other
        if a.data.ndim < 2 or b.data.ndim < 2:
            raise ValueError("matmul requires tensors of rank >= 2")

        def grad_fn(g):
            if a.requires_grad:
                ga = g @ np.swapaxes(b.data, -1, -2)
                a._accumulate(_unbroadcast(ga, a.data.shape))
            if b.requires_grad:
                if b.data.ndim == 2 and a.data.ndim > 2:
                    m, k = a.data.shape[-1], g.shape[-1]
                    gb = a.data.reshape(-1, m).T @ g.reshape(-1, k)
                else:
                    gb = np.swapaxes(a.data, -1, -2) @ g
                b._accumulate(_unbroadcast(gb, b.data.shape))

        return Tensor._from_op(a.data @ b.data, (a, b), grad_fn)

    # -- elementwise functions -------------------------------------------------

    def exp(self):
        a = self
        out_data = np.exp(a.data)

        def grad_fn(g):
            a._accumulate(g * out_data)

        return Tensor._from_op(out_data, (a,), grad_fn)

    def log(self):
        a = self

        def grad_fn(g):
            a._accumulate(g / a.data)

        return Tensor._from_op(np.log(a.data), (a,), grad_fn)

    def sqrt(self):
        a = self
        out_data = np.sqrt(a.data)

        def grad_fn(g):
            a._accumulate(g * (0.5 / out_data))

        return Tensor._from_op(out_data, (a,), grad_fn)

    def relu(self):
        a = self

        def grad_fn(g):
            a._accumulate(g * (a.data > 0))

        return Tensor._from_op(np.maximum(a.data, 0), (a,), grad_fn)

    def gelu(self):
        """Gaussian-error-linear unit, tanh form:
        0.5 x (1 + tanh(sqrt(2/pi) (x + 0.044715 x^3))).
        """
        a = self
        x = a.data
        x3 = x * x * x
        inner = _GELU_C * (x + 0.044715 * x3)
        th = np.tanh(inner)
        out_data = 0.5 * x * (1.0 + th)

        def grad_fn(g):
            sech2 = 1.0 - th * th
            d_inner = _GELU_C * (1.0 + 3.0 * 0.044715 * x * x)
            a._accumulate(g * (0.5 * (1.0 + th) + 0.5 * x * sech2 * d_inner))

        return Tensor._from_op(out_data, (a,), grad_fn)

    # -- reductions and shape ops -----------------------------------------------

    def sum(self, axis=None, keepdims: bool = False):
        a = self

        def grad_fn(g):
            a._accumulate(_spread(g, a.data.shape, axis, keepdims))

        return Tensor._from_op(np.asarray(a.data.sum(axis=axis, keepdims=keepdims)), (a,), grad_fn)

    def mean(self, axis=None, keepdims: bool = False):
        a = self
        count = a.data.size if axis is None else _axis_count(a.data.shape, axis)

        def grad_fn(g):
            a._accumulate(_spread(g, a.data.shape, axis, keepdims) / count)

        return Tensor._from_op(np.asarray(a.data.mean(axis=axis, keepdims=keepdims)), (a,), grad_fn)

    def l2norm(self, axis=None, keepdims: bool = False):
        """Euclidean norm along an axis (zero inputs give zero gradient holes)."""
        return (self * self).sum(axis=axis, keepdims=keepdims).sqrt()

    def reshape(self, *shape):
        if len(shape) == 1 and isinstance(shape[0], (tuple, list)):
            shape = tuple(shape[0])
        a = self

        def grad_fn(g):
            a._accumulate(g.reshape(a.data.shape))

        return Tensor._from_op(a.data.reshape(shape), (a,), grad_fn)

    def transpose(self, axes: Sequence[int]):
        a = self
        axes = tuple(axes)
        inverse = tuple(np.argsort(axes))

        def grad_fn(g):
            a._accumulate(g.transpose(inverse))

        return Tensor._from_op(a.data.transpose(axes), (a,), grad_fn)

    def __getitem__(self, key):
        a = self

        def grad_fn(g):
            buf = np.zeros_like(a.data)
            buf[key] = g
            a._accumulate(buf)

        return Tensor._from_op(a.data[key], (a,), grad_fn)

    # -- normalizing nonlinearities ----------------------------------------------

    def softmax(self, axis: int = -1):
        a = self
        shifted = a.data - a.data.max(axis=axis, keepdims=True)
        e = np.exp(shifted)
        out_data = e / e.sum(axis=axis, keepdims=True)

        def grad_fn(g):
            dot = (g * out_data).sum(axis=axis, keepdims=True)
            a._accumulate(out_data * (g - dot))

        return Tensor._from_op(out_data, (a,), grad_fn)

    def log_softmax(self, axis: int = -1):
        a = self
        shifted = a.data - a.data.max(axis=axis, keepdims=True)
        lse = np.log(np.exp(shifted).sum(axis=axis, keepdims=True))
        out_data = shifted - lse

        def grad_fn(g):
            soft = np.exp(out_data)
            a._accumulate(g - soft * g.sum(axis=axis, keepdims=True))

        return Tensor._from_op(out_data, (a,), grad_fn)


class Parameter(Tensor):
    """Leaf tensor with persistent gradient buffer and a trainable switch."""

    __slots__ = ("name", "_trainable")

    def __init__(self, data, name: str = "", trainable: bool = True, dtype=None):
        super().__init__(data, requires_grad=trainable, dtype=dtype)
        self.name = name
        self._trainable = bool(trainable)
        self.grad = np.zeros_like(self.data)
        self.requires_grad = self._trainable

    @property
    def trainable(self) -> bool:
        return self._trainable

    @trainable.setter
    def trainable(self, value: bool):
        self._trainable = bool(value)
        self.requires_grad = self._trainable

    def zero_grad(self):
        self.grad[...] = 0.0

    def __repr__(self):
        return f"Parameter({self.name!r}, shape={self.data.shape}, trainable={self._trainable})"


def concat(tensors: Iterable[Tensor], axis: int = 0) -> Tensor:
    parts = list(tensors)
    if not parts:
        raise ValueError("concat of an empty sequence")
    dt = parts[0].data.dtype
    for p in parts:
        if p.data.dtype != dt:
            raise TypeError("mixed dtypes in concat")
    sizes = [p.data.shape[axis] for p in parts]
    offsets = np.cumsum([0] + sizes)

    def grad_fn(g):
        index: list = [slice(None)] * g.ndim
        for p, lo, hi in zip(parts, offsets[:-1], offsets[1:]):
            if p.requires_grad:
                index[axis] = slice(lo, hi)
                p._accumulate(g[tuple(index)])

    return Tensor._from_op(np.concatenate([p.data for p in parts], axis=axis), tuple(parts), grad_fn)


def linear(x: Tensor, weight: Tensor, bias: Tensor) -> Tensor:
    """x @ weight + bias in one graph node (training hot path)."""
    out_data = x.data @ weight.data
    out_data += bias.data

    def grad_fn(g):
        if x.requires_grad:
            x._accumulate(g @ weight.data.T)
        k = g.shape[-1]
        g2 = g.reshape(-1, k)
        if weight.requires_grad:
            m = x.data.shape[-1]
            weight._accumulate(x.data.reshape(-1, m).T @ g2)
        if bias.requires_grad:
            bias._accumulate(g2.sum(axis=0))

    return Tensor._from_op(out_data, (x, weight, bias), grad_fn)


def broadcast_rows(rows: Tensor, batch: int) -> Tensor:
    """Tile an [l, d] parameter to [batch, l, d]; gradient sums over the batch."""
    out_data = np.broadcast_to(rows.data[None], (batch,) + rows.data.shape)

    def grad_fn(g):
        rows._accumulate(g.sum(axis=0))

    return Tensor._from_op(out_data, (rows,), grad_fn)


def multi_head_attention(x: Tensor, wq: Tensor, bq: Tensor, wk: Tensor, bk: Tensor,
                         wv: Tensor, bv: Tensor, wo: Tensor, bo: Tensor,
                         heads: int) -> Tensor:
    """Fused softmax attention with projections: [B, T, d] -> [B, T, d].

    One graph node instead of ~15; the composite version's intermediate
    gradient buffers dominate step time at this scale.
    """
    b, t, d = x.data.shape
    if d % heads:
        raise ValueError("embed dim must be divisible by head count")
    dh = d // heads
    scale = 1.0 / math.sqrt(dh)

    def split(m):
        return m.reshape(b, t, heads, dh).transpose(0, 2, 1, 3)

    x2 = x.data.reshape(-1, d)
    qh = split(x2 @ wq.data + bq.data)
    kh = split(x2 @ wk.data + bk.data)
    vh = split(x2 @ wv.data + bv.data)
    att = (qh * scale) @ np.swapaxes(kh, -1, -2)
    att -= att.max(axis=-1, keepdims=True)
    np.exp(att, out=att)
    att /= att.sum(axis=-1, keepdims=True)
    o = (att @ vh).transpose(0, 2, 1, 3).reshape(b, t, d)
    out_data = o @ wo.data
    out_data += bo.data

    def grad_fn(g):
        g2 = g.reshape(-1, d)
        if wo.requires_grad:
            wo._accumulate(o.reshape(-1, d).T @ g2)
        if bo.requires_grad:
            bo._accumulate(g2.sum(axis=0))
        g_oh = split(g2 @ wo.data.T)
        g_att = g_oh @ np.swapaxes(vh, -1, -2)
        g_vh = np.swapaxes(att, -1, -2) @ g_oh
        # softmax backward, in place on g_att
        g_att -= (g_att * att).sum(axis=-1, keepdims=True)
        g_att *= att
        g_qh = (g_att @ kh) * scale
        g_kh = (np.swapaxes(g_att, -1, -2) @ qh) * scale

        def unsplit(m):
            return m.transpose(0, 2, 1, 3).reshape(-1, d)

        g_q2, g_k2, g_v2 = unsplit(g_qh), unsplit(g_kh), unsplit(g_vh)
        for w_, b_, gp in ((wq, bq, g_q2), (wk, bk, g_k2), (wv, bv, g_v2)):
            if w_.requires_grad:
                w_._accumulate(x2.T @ gp)
            if b_.requires_grad:
                b_._accumulate(gp.sum(axis=0))
        if x.requires_grad:
            gx = g_q2 @ wq.data.T
            gx += g_k2 @ wk.data.T
            gx += g_v2 @ wv.data.T
            x._accumulate(gx.reshape(b, t, d))

    parents = (x, wq, bq, wk, bk, wv, bv, wo, bo)
    return Tensor._from_op(out_data, parents, grad_fn)


def layer_norm(x: Tensor, gain: Tensor, bias: Tensor, eps: float = 1e-5) -> Tensor:
    """Normalize over the last axis, then scale and shift.

    Fused op: the composite-graph version costs ~4x as many node visits on
    the training hot path.
    """
    mu = x.data.mean(axis=-1, keepdims=True)
    xhat = x.data - mu
    var = np.einsum("...d,...d->...", xhat, xhat)[..., None] / x.data.shape[-1]
    inv = 1.0 / np.sqrt(var + eps)
    xhat *= inv
    out_data = xhat * gain.data
    out_data += bias.data

    def grad_fn(g):
        if bias.requires_grad:
            bias._accumulate(g.reshape(-1, g.shape[-1]).sum(axis=0))
        if gain.requires_grad:
            gain._accumulate((g * xhat).reshape(-1, g.shape[-1]).sum(axis=0))
        if x.requires_grad:
            gx = g * gain.data
            m1 = gx.mean(axis=-1, keepdims=True)
            m2 = (gx * xhat).mean(axis=-1, keepdims=True)
            x._accumulate(inv * (gx - m1 - xhat * m2))

    return Tensor._from_op(out_data, (x, gain, bias), grad_fn)


def _unbroadcast(grad: np.ndarray, shape: tuple) -> np.ndarray:
    """Sum a broadcast gradient back down to the parent shape."""
    if grad.shape == shape:
        return grad
    extra = grad.ndim - len(shape)
    if extra > 0:
        grad = grad.sum(axis=tuple(range(extra)))
    axes = tuple(i for i, (gs, ps) in enumerate(zip(grad.shape, shape)) if ps == 1 and gs != 1)
    if axes:
        grad = grad.sum(axis=axes, keepdims=True)
    return grad


def _spread(grad: np.ndarray, shape: tuple, axis, keepdims: bool) -> np.ndarray:
    """Broadcast a reduction gradient back over the reduced axes."""
    if axis is None:
        return np.broadcast_to(grad, shape)
    axes = (axis,) if isinstance(axis, int) else tuple(axis)
    axes = tuple(a % len(shape) for a in axes)
    if not keepdims:
        for a in sorted(axes):
            grad = np.expand_dims(grad, a)
    return np.broadcast_to(grad, shape)


def _axis_count(shape: tuple, axis) -> int:
    axes = (axis,) if isinstance(axis, int) else tuple(axis)
    n = 1
    for a in axes:
        n *= shape[a % len(shape)]
    return n
