"""Counter-based, splittable 64-bit random streams.

Every draw is a pure function of a 64-bit stream key and a draw counter::

    draw(key, j) = mix64(key + (j + 1) * GOLDEN)        (mod 2**64)

where ``mix64`` is the SplitMix64 output finalizer. Child streams are keyed
by ``mix64(key ^ mix64((index + 1) * SPLIT))``. Because draws are addressable
by ``(key, j)`` the same numbers can be produced one at a time (``Stream``)
or for a whole batch of runs at once (``uniform_batch``), and both agree
bit-for-bit on every platform.
"""

from __future__ import annotations

import numpy as np

MASK64 = (1 << 64) - 1
GOLDEN = 0x9E3779B97F4A7C15
SPLIT = 0xD1B54A32D192ED03
_M1 = 0xBF58476D1CE4E5B9
_M2 = 0x94D049BB133111EB
_TWO_NEG53 = 1.0 / (1 << 53)


def mix64(z: int) -> int:
    z &= MASK64
    z = ((z ^ (z >> 30)) * _M1) & MASK64
    z = ((z ^ (z >> 27)) * _M2) & MASK64
    return z ^ (z >> 31)


def seed_key(seed: int) -> int:
    """Root stream key for an integer seed (any sign, any size)."""
    return mix64((seed & MASK64) ^ 0x5DEECE66D)


def child_key(key: int, index: int) -> int:
    return mix64(key ^ mix64(((index + 1) * SPLIT) & MASK64))


def derive_seed(seed: int, *parts: int) -> int:
    """Deterministically derive a sub-seed from ``seed`` and integer labels."""
    key = seed_key(seed)
    for p in parts:
        key = child_key(key, p)
    return key


class Stream:
    """A single-owner random stream. Not thread-safe; split instead of sharing."""

    __slots__ = ("key", "counter")

    def __init__(self, key: int, counter: int = 0):
        self.key = key & MASK64
        self.counter = counter

    @classmethod
    def from_seed(cls, seed: int) -> "Stream":
        return cls(seed_key(seed))

    def split(self, index: int) -> "Stream":
        return Stream(child_key(self.key, index))

    def next64(self) -> int:
        self.counter += 1
        return mix64(self.key + self.counter * GOLDEN)

    def random(self) -> float:
        """Uniform float in [0, 1) with 53 bits of precision."""
        return (self.next64() >> 11) * _TWO_NEG53

    def randbelow(self, n: int) -> int:
        """Exactly uniform integer in [0, n) by rejection."""
        if n <= 0:
            raise ValueError("randbelow requires n > 0")
        if n == 1:
            return 0
        limit = ((1 << 64) // n) * n
        while True:
            x = self.next64()
            if x < limit:
                return x % n

    def bernoulli(self, p: float) -> bool:
        return self.random() < p

    def __repr__(self) -> str:
        return f"Stream(key={self.key:#018x}, counter={self.counter})"


# -- vectorised draws -------------------------------------------------------

def _mix64_np(z: np.ndarray) -> np.ndarray:
    z = z ^ (z >> np.uint64(30))
    z = z * np.uint64(_M1)
    z = z ^ (z >> np.uint64(27))
    z = z * np.uint64(_M2)
    return z ^ (z >> np.uint64(31))


def run_keys(seed: int, indices) -> np.ndarray:
    """Stream keys of runs ``indices`` split from the root stream of ``seed``."""
    root = seed_key(seed)
    idx = np.asarray(indices, dtype=np.uint64)
    with np.errstate(over="ignore"):
        salt = _mix64_np((idx + np.uint64(1)) * np.uint64(SPLIT))
        return _mix64_np(np.uint64(root) ^ salt)


def uniform_batch(keys: np.ndarray, draw: int) -> np.ndarray:
    """The ``draw``-th uniform (0-based) of every stream in ``keys``.

    Equals ``Stream(k)`` advanced ``draw`` times then ``.random()``.
    """
    with np.errstate(over="ignore"):
        z = keys + np.uint64(((draw + 1) * GOLDEN) & MASK64)
        out = _mix64_np(z)
    return (out >> np.uint64(11)).astype(np.float64) * _TWO_NEG53
