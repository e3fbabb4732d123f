"""Seedable SplitMix64 generator used for every sampling decision.

SplitMix64 (Steele, Lea & Flood, 2014) is reimplemented here with pure
integer arithmetic so that index streams are reproducible byte for byte on
any platform and in any language that implements the same recurrence.
"""
from __future__ import annotations

import math
from typing import Sequence, TypeVar

T = TypeVar("T")

MASK64 = (1 << 64) - 1
GOLDEN_GAMMA = 0x9E3779B97F4A7C15


def mix64(z: int) -> int:
    """SplitMix64 output finalizer."""
    z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & MASK64
    z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & MASK64
    return z ^ (z >> 31)


def _fnv1a64(text: str) -> int:
    h = 0xCBF29CE484222325
    for byte in text.encode("utf-8"):
        h = ((h ^ byte) * 0x100000001B3) & MASK64
    return h


def derive_seed(master: int, *keys: int | str) -> int:
    """Derive a child seed from a master seed and a path of keys.

    Integer keys are mixed directly; string keys go through FNV-1a first.
    The result depends on the order of ``keys``.
    """
    h = mix64((master & MASK64) ^ GOLDEN_GAMMA)
    for key in keys:
        k = _fnv1a64(key) if isinstance(key, str) else key & MASK64
        h = mix64((h + GOLDEN_GAMMA + k) & MASK64)
    return h


class SplitMix64:
    """Minimal SplitMix64 stream with the helpers the samplers need."""

    __slots__ = ("state",)

    def __init__(self, seed: int) -> None:
        self.state = seed & MASK64

    def next_u64(self) -> int:
        self.state = (self.state + GOLDEN_GAMMA) & MASK64
        return mix64(self.state)

    def below(self, n: int) -> int:
        """Unbiased integer in ``[0, n)`` by rejection of the short range."""
        if n <= 0:
            raise ValueError("n must be positive")
        cutoff = (1 << 64) % n
        while True:
            r = self.next_u64()
            if r >= cutoff:
                return r % n

    def uniform(self) -> float:
        """Float in ``[0, 1)`` with 53 random bits."""
        return (self.next_u64() >> 11) * (1.0 / (1 << 53))

    def uniform_open(self) -> float:
        """Float in ``(0, 1]``; safe to pass to ``log``."""
        return ((self.next_u64() >> 11) + 1) * (1.0 / (1 << 53))

    def shuffle(self, items: list) -> None:
        """In-place Fisher-Yates shuffle."""
        for i in range(len(items) - 1, 0, -1):
            j = self.below(i + 1)
            items[i], items[j] = items[j], items[i]

    def sample(self, population: Sequence[T], k: int) -> list[T]:
        """``k`` distinct elements by a partial Fisher-Yates pass."""
        n = len(population)
        if not 0 <= k <= n:
            raise ValueError(f"cannot sample {k} items from {n}")
        pool = list(population)
        for i in range(k):
            j = i + self.below(n - i)
            pool[i], pool[j] = pool[j], pool[i]
        return pool[:k]

    def dirichlet_flat(self, k: int) -> list[float]:
        """Uniform point on the ``k``-simplex via normalized exponentials."""
        draws = [-math.log(self.uniform_open()) for _ in range(k)]
        total = math.fsum(draws)
        if total == 0.0:
            return [1.0 / k] * k
        return [d / total for d in draws]
