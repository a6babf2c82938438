import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from cadet.engine import (
    GradCheckError,
    Parameter,
    Tensor,
    autograd_off,
    concat,
    grad_check,
    layer_norm,
    set_debug_checks,
)
from cadet.engine.rng import Rng

F64 = np.float64


def _param(rng, shape, name):
    return Parameter(rng.normal(int(np.prod(shape))).reshape(shape), name, dtype=F64)


def test_square_gradient():
    x = Parameter(np.array([3.0]), "x", dtype=F64)
    (x * x).sum().backward()
    assert np.allclose(x.grad, [6.0])


def test_softmax_sum_has_zero_gradient():
    # softmax sums to one, so d(sum softmax)/dx is identically zero
    x = Parameter(np.array([[0.3, -1.2, 2.0, 0.7]]), "x", dtype=F64)
    x.softmax(axis=-1).sum().backward()
    assert np.allclose(x.grad, 0.0, atol=1e-15)


def test_two_layer_net_matches_finite_differences():
    rng = Rng(7)
    w1 = _param(rng, (6, 8), "w1")
    b1 = _param(rng, (8,), "b1")
    w2 = _param(rng, (8, 3), "w2")
    b2 = _param(rng, (3,), "b2")
    x = Tensor(rng.normal(4 * 6).reshape(4, 6), dtype=F64)
    labels = np.array([0, 2, 1, 0])
    onehot = Tensor(np.eye(3, dtype=F64)[labels], dtype=F64)

    def loss():
        h = (x @ w1 + b1).gelu()
        logits = h @ w2 + b2
        return -(onehot * logits.log_softmax(axis=-1)).sum() / 4.0

    err = grad_check(loss, [w1, b1, w2, b2], eps=1e-5)
    assert err < 1e-6


def test_grad_check_quadratic_is_nearly_exact():
    a = Parameter(np.array([[2.0, -1.0], [-1.0, 3.0]]), "a", dtype=F64)
    x = Tensor(np.array([[0.7], [-0.4]]), dtype=F64)

    def loss():
        return (x.transpose((1, 0)) @ a @ x).sum()

    assert grad_check(loss, [a], eps=1e-5) < 1e-9


def test_grad_check_negative_control():
    # a hand-coded op with a wrong gradient must be caught loudly
    w = Parameter(np.array([1.0, 2.0]), "w", dtype=F64)

    def loss():
        out_data = np.asarray((w.data * w.data).sum())

        def wrong_grad(g):
            w._accumulate(g * 1.5 * w.data)  # true gradient is 2 * w

        return Tensor._from_op(out_data, (w,), wrong_grad)

    err = grad_check(loss, [w], eps=1e-5)
    assert err > 1e-2
    with pytest.raises(GradCheckError, match="coordinate"):
        grad_check(loss, [w], eps=1e-5, tol=1e-6)


def test_backward_rejects_non_scalar():
    x = Parameter(np.ones(3), "x", dtype=F64)
    with pytest.raises(ValueError, match="scalar"):
        (x * x).backward()


def test_backward_rejects_detached_graph():
    x = Tensor(np.ones(1), dtype=F64)
    with pytest.raises(RuntimeError, match="detached"):
        (x * x).sum().backward()


def test_autograd_off_builds_no_graph():
    x = Parameter(np.ones(3), "x", dtype=F64)
    with autograd_off():
        y = (x * x).sum()
    assert not y.requires_grad
    with pytest.raises(RuntimeError):
        y.backward()


def test_mixed_dtype_rejected():
    a = Tensor(np.ones(2), dtype=np.float32)
    b = Tensor(np.ones(2), dtype=np.float64)
    with pytest.raises(TypeError, match="mixed"):
        a + b


def test_debug_checks_flag_nonfinite():
    set_debug_checks(True)
    try:
        x = Tensor(np.array([0.0]), dtype=F64)
        with pytest.raises(FloatingPointError):
            x.log()
    finally:
        set_debug_checks(False)


def test_matmul_batched_gradients():
    rng = Rng(3)
    a = _param(rng, (2, 3, 4, 5), "a")
    b = _param(rng, (2, 3, 5, 4), "b")
    w = _param(rng, (4, 6), "w")

    def loss():
        return ((a @ b) @ w).mean()

    assert grad_check(loss, [a, b, w], eps=1e-5, max_coords_per_param=30) < 1e-6


def test_slicing_and_concat_gradients():
    rng = Rng(11)
    a = _param(rng, (3, 7), "a")
    b = _param(rng, (2, 7), "b")

    def loss():
        joined = concat([a, b], axis=0)
        return (joined[1:4, 2:5] * joined[1:4, 2:5]).sum()

    assert grad_check(loss, [a, b], eps=1e-5) < 1e-7


def test_layer_norm_gradients():
    rng = Rng(5)
    x = _param(rng, (4, 6), "x")
    g = Parameter(1.0 + 0.1 * rng.normal(6), "g", dtype=F64)
    b = _param(rng, (6,), "b")

    def loss():
        return (layer_norm(x, g, b) ** 3.0).mean()

    assert grad_check(loss, [x, g, b], eps=1e-5) < 1e-6


@settings(max_examples=25, deadline=None)
@given(seed=st.integers(0, 10_000))
def test_random_composite_ops_match_finite_differences(seed):
    rng = Rng(seed)
    x = _param(rng, (3, 5), "x")
    w = _param(rng, (5, 5), "w")

    def loss():
        h = (x @ w * 0.5).gelu()
        s = h.softmax(axis=-1)
        n = (h * h).sum(axis=1, keepdims=True).sqrt()
        return ((s * h) / (n + 1.0)).sum() * 0.25 + (n + 2.0).log().sum()

    assert grad_check(loss, [x, w], eps=1e-5, max_coords_per_param=20, rng=Rng(seed + 1)) < 1e-6


def test_grad_check_rejects_float32():
    w = Parameter(np.ones(2, dtype=np.float32), "w", dtype=np.float32)
    with pytest.raises(TypeError, match="float64"):
        grad_check(lambda: (w * w).sum(), [w])


def test_parameter_freeze_receives_no_gradient():
    w = Parameter(np.ones(3), "w", trainable=False, dtype=F64)
    v = Parameter(np.ones(3), "v", dtype=F64)
    ((w * v) * 2.0).sum().backward()
    assert np.all(w.grad == 0.0)
    assert np.allclose(v.grad, 2.0)
