"""Counter-based deterministic random number generation.

The generator is a fixed function of ``(seed, counter)``: output ``i`` is the
splitmix64 finalizer applied to ``mix(seed) + (counter + i) * GOLDEN``.  This
makes every draw addressable, so per-sample streams can be derived without
knowing how work is split across workers.  The algorithm below is frozen for
the lifetime of the repository; changing it invalidates every recorded run.
"""

from __future__ import annotations

import numpy as np

_GOLDEN = np.uint64(0x9E3779B97F4A7C15)
_MIX1 = np.uint64(0xBF58476D1CE4E5B9)
_MIX2 = np.uint64(0x94D049BB133111EB)
_MASK = np.uint64(0xFFFFFFFFFFFFFFFF)


def _finalize(z: np.ndarray) -> np.ndarray:
    """splitmix64 finalizer, elementwise on uint64 arrays."""
    z = (z ^ (z >> np.uint64(30))) * _MIX1
    z = (z ^ (z >> np.uint64(27))) * _MIX2
    return z ^ (z >> np.uint64(31))


def _mix_seed(seed: int) -> np.uint64:
    s = np.uint64(seed & 0xFFFFFFFFFFFFFFFF)
    return np.uint64(_finalize(np.asarray([s], dtype=np.uint64))[0])


class Rng:
    """Deterministic stream of draws addressed by ``(seed, counter)``.

    Draw ``counter + i`` is a pure function of the seed and the absolute
    counter position, independent of how draws are batched.
    """

    def __init__(self, seed: int, counter: int = 0):
        self.seed = int(seed) & 0xFFFFFFFFFFFFFFFF
        self.counter = int(counter)
        self._base = _mix_seed(self.seed)

    def __repr__(self):
        return f"Rng(seed={self.seed}, counter={self.counter})"

    def _raw(self, n: int) -> np.ndarray:
        idx = np.arange(self.counter, self.counter + n, dtype=np.uint64)
        self.counter += n
        with np.errstate(over="ignore"):
            return _finalize(self._base + idx * _GOLDEN)

    def uniform(self, n: int) -> np.ndarray:
        """n doubles uniform in [0, 1), using the top 53 bits of each word."""
        return (self._raw(n) >> np.uint64(11)).astype(np.float64) * (2.0 ** -53)

    def normal(self, n: int) -> np.ndarray:
        """n standard normal doubles via Box-Muller (consumes 2n draws)."""
        u = self.uniform(2 * n)
        u1 = np.maximum(u[:n], 2.0 ** -53)
        u2 = u[n:]
        return np.sqrt(-2.0 * np.log(u1)) * np.cos(2.0 * np.pi * u2)

    def integers(self, n: int, lo: int, hi: int) -> np.ndarray:
        """n integers uniform in [lo, hi)."""
        if hi <= lo:
            raise ValueError(f"empty integer range [{lo}, {hi})")
        return lo + np.floor(self.uniform(n) * (hi - lo)).astype(np.int64)

    def permutation(self, n: int) -> np.ndarray:
        """Fisher-Yates permutation of range(n)."""
        perm = np.arange(n, dtype=np.int64)
        if n <= 1:
            return perm
        u = self.uniform(n - 1)
        for i in range(n - 1, 0, -1):
            j = int(u[n - 1 - i] * (i + 1))
            perm[i], perm[j] = perm[j], perm[i]
        return perm

    def choice(self, n: int, k: int) -> np.ndarray:
        """k indices sampled uniformly without replacement from range(n)."""
        if k > n:
            raise ValueError(f"cannot draw {k} from {n} without replacement")
        return np.sort(self.permutation(n)[:k])

    def derive(self, *ids: int) -> "Rng":
        """Independent child stream addressed by integer ids.

        ``rng.derive(i)`` is the per-sample stream contract: the child depends
        only on (seed, ids), never on this stream's counter.
        """
        acc = self._base
        one = np.uint64(1)
        with np.errstate(over="ignore"):
            for x in ids:
                word = np.uint64(int(x) & 0xFFFFFFFFFFFFFFFF)
                acc = _finalize(np.asarray([(acc + one) * _GOLDEN ^ word], dtype=np.uint64))[0]
        return Rng(int(acc))
