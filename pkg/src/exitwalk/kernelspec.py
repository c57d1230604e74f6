"""Flat encoding of a step law consumed by the kernels.

Per-step word consumption is fixed for each kind, so step ``t`` of a stream
always reads words ``word0 + t * W .. word0 + t * W + W - 1``:

========== ====================== =============================================
kind       arrays                 words per step
========== ====================== =============================================
POINT      a = x (d)              0
FIXED      idx (m), a = alpha (m) ceil(m / 64)   (sign of entry i = bit i % 64)
RANDOM     a = alpha (d), mode=k  k + ceil(k / 64) (Fisher-Yates, then signs)
GAUSS      a = sigma (d)          2 * ceil(d / 2) (Box-Muller pairs)
RADIAL     a = radii, b = cdf     2 (radius, then sign / signed axis)
WITNESS    a = sqrt(N) x (N * d)  2 (index, then sign)
========== ====================== =============================================

A non-empty ``mu`` adds a fixed drift to every step.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

POINT, FIXED, RANDOM, GAUSS, RADIAL, WITNESS = range(6)
KIND_NAMES = ("point", "fixed", "random", "gauss", "radial", "witness")


def _words(kind: int, d: int, m: int, mode: int) -> int:
    if kind == POINT:
        return 0
    if kind == FIXED:
        return -(-m // 64)
    if kind == RANDOM:
        return mode + -(-mode // 64)
    if kind == GAUSS:
        return 2 * (-(-d // 2))
    return 2


@dataclass(frozen=True)
class KernelSpec:
    kind: int
    d: int
    a: np.ndarray
    idx: np.ndarray = field(default_factory=lambda: np.zeros(0, dtype=np.int64))
    b: np.ndarray = field(default_factory=lambda: np.zeros(0))
    mode: int = 0
    mu: np.ndarray = field(default_factory=lambda: np.zeros(0))

    def __post_init__(self):
        object.__setattr__(self, "a", np.ascontiguousarray(self.a, dtype=np.float64))
        object.__setattr__(self, "idx", np.ascontiguousarray(self.idx, dtype=np.int64))
        object.__setattr__(self, "b", np.ascontiguousarray(self.b, dtype=np.float64))
        object.__setattr__(self, "mu", np.ascontiguousarray(self.mu, dtype=np.float64))

    @property
    def m(self) -> int:
        if self.kind == FIXED:
            return len(self.idx)
        if self.kind == RADIAL:
            return len(self.a)
        return 0

    @property
    def words_per_step(self) -> int:
        return _words(self.kind, self.d, self.m, self.mode)

    @property
    def sparse(self) -> bool:
        return self.kind in (FIXED, RANDOM, RADIAL) and len(self.mu) == 0

    def with_shift(self, mu) -> "KernelSpec":
        mu = np.asarray(mu, dtype=float)
        if len(self.mu):
            mu = self.mu + mu
        return KernelSpec(self.kind, self.d, self.a, self.idx, self.b, self.mode, mu)

    def args(self) -> tuple:
        return (self.kind, self.d, self.idx, self.a, self.b, self.mode, self.mu)
