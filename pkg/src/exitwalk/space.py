"""Finite-dimensional lp spaces: the ambient space of every walk."""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np


class DimensionError(ValueError):
    """Vector length does not match the space dimension."""


@dataclass(frozen=True)
class SpaceSpec:
    """R^d with the lp norm, 1 <= p < inf."""

    d: int
    p: float = 2.0

    def __post_init__(self):
        if isinstance(self.d, bool) or int(self.d) != self.d or self.d < 1:
            raise ValueError(f"dimension must be a positive integer, got {self.d!r}")
        p = float(self.p)
        if not math.isfinite(p) or p < 1.0:
            raise ValueError(f"norm exponent must satisfy 1 <= p < inf, got {self.p!r}")
        object.__setattr__(self, "d", int(self.d))
        object.__setattr__(self, "p", p)

    def zeros(self) -> np.ndarray:
        return np.zeros(self.d)

    def vector(self, coords) -> np.ndarray:
        x = np.asarray(coords, dtype=float)
        if x.shape != (self.d,):
            raise DimensionError(f"expected {self.d} coordinates, got shape {x.shape}")
        if not np.all(np.isfinite(x)):
            raise ValueError("vector entries must be finite")
        return x

    def to_dict(self) -> dict:
        return {"d": self.d, "p": self.p}


def _check(x: np.ndarray, spec: SpaceSpec) -> np.ndarray:
    x = np.asarray(x, dtype=float)
    if x.shape[-1] != spec.d:
        raise DimensionError(f"expected last axis of length {spec.d}, got shape {x.shape}")
    return x


def lp_norm(x, spec: SpaceSpec):
    """lp norm of ``x`` (or of each row of a 2-d array).

    Entries are divided by the largest magnitude before raising to the power
    ``p`` so that neither large p nor extreme magnitudes overflow.
    """
    x = _check(x, spec)
    a = np.abs(x)
    scale = a.max(axis=-1, keepdims=True)
    safe = np.where(scale > 0, scale, 1.0)
    if spec.p == 2.0:
        inner = np.sqrt(np.sum((a / safe) ** 2, axis=-1))
    elif spec.p == 1.0:
        inner = np.sum(a / safe, axis=-1)
    else:
        inner = np.sum((a / safe) ** spec.p, axis=-1) ** (1.0 / spec.p)
    out = np.squeeze(scale, axis=-1) * inner
    return float(out) if out.ndim == 0 else out


def add_assign(s: np.ndarray, x, spec: SpaceSpec | None = None) -> np.ndarray:
    """In-place ``s += x``; returns ``s``."""
    x = np.asarray(x, dtype=float)
    if s.shape != x.shape or (spec is not None and s.shape[-1] != spec.d):
        raise DimensionError(f"shape mismatch: {s.shape} vs {x.shape}")
    s += x
    return s


def power_sum(x, p: float) -> float:
    """``sum |x_j|^p`` without rescaling (what the walk kernels maintain)."""
    a = np.abs(np.asarray(x, dtype=float))
    return float(np.sum(a * a)) if p == 2.0 else float(np.sum(a ** p))
