"""Deterministic 64-bit PRNG with splittable substreams.

The generator is a counter-mode SplitMix64: output k of stream s is
``mix64(root(s) + k * GOLDEN)``, where ``mix64`` is the xorshift-multiply
finalizer. Because outputs are a pure function of (root, counter), blocks
of values vectorize with numpy uint64 arithmetic, and ``split(key)``
derives an independent child stream without consuming from the parent.
Substreams keyed by client id / round / epoch give every component of a
simulation its own replayable randomness.

The raw integer stream is bit-identical across platforms. Derived floats
use IEEE-754 double arithmetic (log/cos for normals), which is exact on
any one platform and matches across platforms with a conforming libm.
"""

from __future__ import annotations

import numpy as np

_M64 = (1 << 64) - 1
_GOLDEN = 0x9E3779B97F4A7C15
_SEED_SALT = 0x6A09E667F3BCC909
_SPLIT_SALT = 0xD1B54A32D192ED03

_INV_2_53 = float(2.0**-53)


def _mix(z: int) -> int:
    """SplitMix64 finalizer on a Python int, mod 2**64."""
    z &= _M64
    z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & _M64
    z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & _M64
    return z ^ (z >> 31)


def _mix_array(z: np.ndarray) -> np.ndarray:
    z = (z ^ (z >> np.uint64(30))) * np.uint64(0xBF58476D1CE4E5B9)
    z = (z ^ (z >> np.uint64(27))) * np.uint64(0x94D049BB133111EB)
    return z ^ (z >> np.uint64(31))


class Rng:
    """One splittable stream. Not thread-safe; give each context its own."""

    __slots__ = ("_root", "_count")

    def __init__(self, seed: int) -> None:
        self._root = _mix((int(seed) & _M64) ^ _SEED_SALT)
        self._count = 0

    def child_seed(self, key: int) -> int:
        """Seed of the child stream for `key`; pure in (root, key)."""
        return _mix(self._root ^ _mix((int(key) & _M64) + _SPLIT_SALT))

    def split(self, key: int) -> "Rng":
        """Independent child stream; does not advance this stream."""
        return Rng(self.child_seed(key))

    def _raw(self, n: int) -> np.ndarray:
        """Next n outputs as uint64."""
        start = self._count + 1
        self._count += n
        idx = np.arange(start, start + n, dtype=np.uint64) * np.uint64(_GOLDEN)
        idx += np.uint64(self._root)
        return _mix_array(idx)

    def uint64(self, size: int | tuple[int, ...] | None = None):
        if size is None:
            return int(self._raw(1)[0])
        shape = (size,) if isinstance(size, int) else tuple(size)
        n = int(np.prod(shape)) if shape else 1
        return self._raw(n).reshape(shape)

    def random(self, size: int | tuple[int, ...] | None = None):
        """Float64 in [0, 1) with 53 random bits."""
        if size is None:
            return float(self._raw(1)[0] >> np.uint64(11)) * _INV_2_53
        shape = (size,) if isinstance(size, int) else tuple(size)
        n = int(np.prod(shape)) if shape else 1
        u = (self._raw(n) >> np.uint64(11)).astype(np.float64) * _INV_2_53
        return u.reshape(shape)

    def uniform(self, low: float, high: float, size=None):
        return low + (high - low) * self.random(size)

    def normal(self, mean: float = 0.0, std: float = 1.0, size=None):
        """Gaussian samples via Box-Muller."""
        shape = () if size is None else ((size,) if isinstance(size, int) else tuple(size))
        n = int(np.prod(shape)) if shape else 1
        half = (n + 1) // 2
        # u1 in (0, 1] so log never sees zero
        u1 = ((self._raw(half) >> np.uint64(11)).astype(np.float64) + 1.0) * _INV_2_53
        u2 = (self._raw(half) >> np.uint64(11)).astype(np.float64) * _INV_2_53
        r = np.sqrt(-2.0 * np.log(u1))
        theta = (2.0 * np.pi) * u2
        z = np.empty(2 * half, dtype=np.float64)
        z[0::2] = r * np.cos(theta)
        z[1::2] = r * np.sin(theta)
        out = mean + std * z[:n]
        if size is None:
            return float(out[0])
        return out.reshape(shape)

    def integers(self, bound: int, size=None):
        """Unbiased integers in [0, bound) via rejection sampling."""
        if bound <= 0:
            raise ValueError(f"bound must be positive, got {bound}")
        if size is None:
            return int(self._integer_block(bound, 1)[0])
        shape = (size,) if isinstance(size, int) else tuple(size)
        n = int(np.prod(shape)) if shape else 1
        return self._integer_block(bound, n).reshape(shape)

    def _integer_block(self, bound: int, n: int) -> np.ndarray:
        rem = (1 << 64) % bound
        out = np.empty(n, dtype=np.int64)
        filled = 0
        while filled < n:
            draw = self._raw(n - filled)
            if rem:
                draw = draw[draw < np.uint64((1 << 64) - rem)]
            accepted = (draw % np.uint64(bound)).astype(np.int64)
            out[filled : filled + accepted.size] = accepted
            filled += accepted.size
        return out

    def permutation(self, n: int) -> np.ndarray:
        """Uniform permutation of range(n) (sort of random 64-bit keys)."""
        if n == 0:
            return np.empty(0, dtype=np.int64)
        keys = self._raw(n)
        return np.argsort(keys, kind="stable").astype(np.int64)

    def shuffled(self, items: list) -> list:
        return [items[i] for i in self.permutation(len(items))]

    def weighted_choice(self, cumulative: np.ndarray, size=None):
        """Indices sampled by a precomputed cumulative weight vector."""
        u = self.random(size) * cumulative[-1]
        return np.searchsorted(cumulative, u, side="right")
