"""Counter-based random streams.

Every simulated path owns a stream identified by a 64-bit key derived from
``(seed, path index)``.  Word ``i`` of a stream is ``mix64(key + (i + 1) * GOLDEN)``
(the SplitMix64 output function evaluated at an explicit counter), so any
word can be produced without touching the others.  Both kernel backends
compute the same words, which is what makes estimates independent of how
paths are split across workers.
"""
from __future__ import annotations

import hashlib
from dataclasses import dataclass

import numpy as np

MASK64 = (1 << 64) - 1
GOLDEN = 0x9E3779B97F4A7C15
STREAM_STRIDE = 0xD1B54A32D192ED03
_INV_2_53 = 1.0 / 9007199254740992.0


def mix64(z: int) -> int:
    """SplitMix64 finalizer on a Python int."""
    z &= MASK64
    z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & MASK64
    z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & MASK64
    return z ^ (z >> 31)


def mix64_array(z: np.ndarray) -> np.ndarray:
    """Vectorized :func:`mix64` on a ``uint64`` array (wrapping arithmetic)."""
    z = np.asarray(z, dtype=np.uint64)
    z = (z ^ (z >> np.uint64(30))) * np.uint64(0xBF58476D1CE4E5B9)
    z = (z ^ (z >> np.uint64(27))) * np.uint64(0x94D049BB133111EB)
    return z ^ (z >> np.uint64(31))


def stream_key(seed: int, index: int) -> int:
    return mix64(mix64(seed) + (index + 1) * STREAM_STRIDE)


def stream_keys(seed: int, start: int, count: int) -> np.ndarray:
    """Keys of streams ``start .. start + count - 1`` as a ``uint64`` array."""
    base = np.uint64(mix64(seed))
    idx = np.arange(start + 1, start + count + 1, dtype=np.uint64)
    return mix64_array(base + idx * np.uint64(STREAM_STRIDE))


def derive_seed(seed: int, *labels) -> int:
    """Derive an independent 64-bit seed for a sub-experiment.

    Labels are hashed with their repr, so ``derive_seed(s, "exit", 8.0)`` is
    stable across runs and platforms.
    """
    h = hashlib.sha256(repr((int(seed) & MASK64, labels)).encode()).digest()
    return int.from_bytes(h[:8], "little")


@dataclass
class RngStream:
    """A single counter-based stream: ``key`` plus the next word index."""

    key: int
    counter: int = 0

    @classmethod
    def for_path(cls, seed: int, path: int) -> "RngStream":
        return cls(stream_key(seed, path))

    def word(self, i: int) -> int:
        return mix64(self.key + ((i + 1) * GOLDEN & MASK64))

    def next_word(self) -> int:
        w = self.word(self.counter)
        self.counter += 1
        return w

    def uniform(self) -> float:
        return (self.next_word() >> 11) * _INV_2_53

    def advance(self, words: int) -> None:
        self.counter += int(words)
