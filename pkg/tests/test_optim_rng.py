import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from cadet.engine import Parameter, SgdMomentum, cosine_anneal_lr
from cadet.engine.rng import Rng


class TestSgdMomentum:
    def test_plain_sgd_step(self):
        w = Parameter(np.zeros(1), "w", dtype=np.float64)
        opt = SgdMomentum([w], lr0=0.1, momentum=0.0)
        w.grad[:] = 1.0
        opt.step(lr=0.1)
        assert np.allclose(w.data, [-0.1])

    def test_momentum_unrolled_two_steps(self):
        # v1 = g = 1, w = -1; v2 = 0.9 + 1 = 1.9, w = -2.9
        w = Parameter(np.zeros(1), "w", dtype=np.float64)
        opt = SgdMomentum([w], lr0=1.0, momentum=0.9)
        for _ in range(2):
            w.grad[:] = 1.0
            opt.step(lr=1.0)
        assert np.allclose(w.data, [-2.9])

    def test_frozen_parameter_never_moves(self):
        w = Parameter(np.full(4, 5.0), "w", trainable=False, dtype=np.float64)
        opt = SgdMomentum([w], lr0=1.0, momentum=0.9)
        before = w.data.copy()
        for _ in range(10):
            w.grad[:] = 3.0
            opt.step(lr=1.0)
        assert w.data.tobytes() == before.tobytes()

    def test_rejects_nonpositive_lr(self):
        w = Parameter(np.zeros(1), "w", dtype=np.float64)
        opt = SgdMomentum([w], lr0=0.1)
        with pytest.raises(ValueError):
            opt.step(lr=0.0)

    def test_rejects_bad_momentum(self):
        w = Parameter(np.zeros(1), "w", dtype=np.float64)
        with pytest.raises(ValueError):
            SgdMomentum([w], lr0=0.1, momentum=1.0)


class TestCosineSchedule:
    def test_endpoints_and_midpoint(self):
        assert cosine_anneal_lr(0.4, 0, 10) == pytest.approx(0.4)
        assert cosine_anneal_lr(0.4, 10, 10) == pytest.approx(0.0, abs=1e-15)
        assert cosine_anneal_lr(0.4, 5, 10) == pytest.approx(0.2)

    def test_rejects_out_of_range(self):
        with pytest.raises(ValueError):
            cosine_anneal_lr(0.1, 11, 10)
        with pytest.raises(ValueError):
            cosine_anneal_lr(0.1, 0, 0)

    @settings(max_examples=30, deadline=None)
    @given(T=st.integers(1, 500))
    def test_monotone_non_increasing(self, T):
        values = [cosine_anneal_lr(1.0, t, T) for t in range(T + 1)]
        assert all(a >= b for a, b in zip(values, values[1:]))


class TestRng:
    def test_same_seed_identical(self):
        assert np.array_equal(Rng(123).uniform(100), Rng(123).uniform(100))

    def test_adjacent_seeds_diverge_immediately(self):
        for s in [0, 1, 41, 999_999]:
            a = Rng(s).uniform(8)
            b = Rng(s + 1).uniform(8)
            assert np.all(a != b)

    def test_counter_addressing_is_batch_independent(self):
        one = Rng(9)
        parts = np.concatenate([one.uniform(3), one.uniform(4), one.uniform(3)])
        assert np.array_equal(parts, Rng(9).uniform(10))

    def test_uniform_mean(self):
        u = Rng(2024).uniform(100_000)
        assert abs(u.mean() - 0.5) < 0.01
        assert u.min() >= 0.0 and u.max() < 1.0

    def test_normal_moments(self):
        z = Rng(7).normal(100_000)
        assert abs(z.mean()) < 0.02
        assert abs(z.std() - 1.0) < 0.02

    def test_derive_independent_of_parent_counter(self):
        parent = Rng(5)
        child_early = parent.derive(3).uniform(4)
        parent.uniform(100)
        child_late = parent.derive(3).uniform(4)
        assert np.array_equal(child_early, child_late)

    def test_derive_distinct_streams(self):
        a = Rng(5).derive(1).uniform(4)
        b = Rng(5).derive(2).uniform(4)
        assert not np.array_equal(a, b)

    def test_permutation_is_a_permutation(self):
        p = Rng(3).permutation(257)
        assert np.array_equal(np.sort(p), np.arange(257))

    def test_choice_without_replacement(self):
        c = Rng(3).choice(50, 20)
        assert len(set(c.tolist())) == 20
        with pytest.raises(ValueError):
            Rng(3).choice(5, 6)

    @settings(max_examples=20, deadline=None)
    @given(seed=st.integers(0, 2**32), n=st.integers(1, 64))
    def test_stream_is_pure_function_of_seed_and_counter(self, seed, n):
        r1 = Rng(seed, counter=17)
        r2 = Rng(seed)
        r2.uniform(17)
        assert np.array_equal(r1.uniform(n), r2.uniform(n))
