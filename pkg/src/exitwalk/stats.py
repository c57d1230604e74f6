"""Streaming moments, interval estimates and log-log slope fits."""
from __future__ import annotations

import math

import numpy as np
from scipy import stats as _st

Z95 = 1.959963984540054


class MomentAccumulator:
    """Count, mean and centered sum of squares, mergeable (Chan et al.).

    ``update`` takes a batch along axis 0; each batch is reduced with numpy's
    pairwise summation and folded in with the parallel-variance formula, so
    merging per-block accumulators in a fixed order gives a fixed result.
    """

    def __init__(self, dim: int | None = None):
        shape = () if dim is None else (dim,)
        self.n = 0
        self._mean = np.zeros(shape)
        self._m2 = np.zeros(shape)

    def update(self, batch) -> "MomentAccumulator":
        batch = np.asarray(batch, dtype=float)
        if batch.shape[0] == 0:
            return self
        other = MomentAccumulator.__new__(MomentAccumulator)
        other.n = batch.shape[0]
        other._mean = batch.mean(axis=0)
        other._m2 = ((batch - other._mean) ** 2).sum(axis=0)
        return self.merge(other)

    def merge(self, other: "MomentAccumulator") -> "MomentAccumulator":
        if other.n == 0:
            return self
        if self.n == 0:
            self.n, self._mean, self._m2 = other.n, np.copy(other._mean), np.copy(other._m2)
            return self
        n = self.n + other.n
        delta = other._mean - self._mean
        self._mean = self._mean + delta * (other.n / n)
        self._m2 = self._m2 + other._m2 + delta * delta * (self.n * other.n / n)
        self.n = n
        return self

    @property
    def mean(self):
        m = self._mean
        return float(m) if np.ndim(m) == 0 else m.copy()

    @property
    def var(self):
        """Unbiased sample variance (0 with fewer than two observations)."""
        v = self._m2 / (self.n - 1) if self.n > 1 else np.zeros_like(self._m2)
        return float(v) if np.ndim(v) == 0 else v

    @property
    def se(self):
        """Standard error of the mean."""
        s = np.sqrt(np.asarray(self.var) / max(self.n, 1))
        return float(s) if np.ndim(s) == 0 else s


def wilson_interval(successes: int, n: int, z: float = Z95) -> tuple[float, float]:
    if n == 0:
        return 0.0, 1.0
    phat = successes / n
    denom = 1 + z * z / n
    centre = (phat + z * z / (2 * n)) / denom
    half = z * math.sqrt(phat * (1 - phat) / n + z * z / (4 * n * n)) / denom
    lo = 0.0 if successes == 0 else max(0.0, centre - half)
    hi = 1.0 if successes == n else min(1.0, centre + half)
    return lo, hi


def binomial_se(phat: float, n: int) -> float:
    return math.sqrt(max(phat * (1 - phat), 0.0) / n) if n else 0.0


def sample_variance_se(x: np.ndarray) -> float:
    """Standard error of the unbiased sample variance (fourth-moment formula)."""
    x = np.asarray(x, dtype=float)
    n = x.size
    c = x - x.mean()
    m2 = np.mean(c ** 2)
    m4 = np.mean(c ** 4)
    return math.sqrt(max(m4 - (n - 3) / (n - 1) * m2 * m2, 0.0) / n)


def loglog_slope(x, y, y_se=None) -> dict:
    """Least-squares slope of log y on log x.

    The reported standard error combines the regression residual error with
    the propagated per-point errors ``y_se`` (slope is linear in log y).
    """
    lx = np.log(np.asarray(x, dtype=float))
    ly = np.log(np.asarray(y, dtype=float))
    if lx.size < 2:
        raise ValueError("need at least two points for a slope")
    fit = _st.linregress(lx, ly)
    reg_se = float(fit.stderr) if lx.size > 2 and np.isfinite(fit.stderr) else 0.0
    prop_se = 0.0
    if y_se is not None:
        w = (lx - lx.mean()) / np.sum((lx - lx.mean()) ** 2)
        prop_se = float(np.sqrt(np.sum((w * np.asarray(y_se) / np.asarray(y)) ** 2)))
    return {"slope": float(fit.slope), "intercept": float(fit.intercept),
            "stderr": math.hypot(reg_se, prop_se), "regression_stderr": reg_se,
            "propagated_stderr": prop_se}
