"""Exit-time engine: first n with ||S_n|| > r, and statistics of ||S_n||.

Paths are cut into fixed-size blocks.  Block b always holds paths
``b * BLOCK .. (b + 1) * BLOCK - 1`` whatever the worker count, each path has
its own counter-based stream, and block results are merged in block order;
estimates are therefore bit-identical for any number of threads.
"""
from __future__ import annotations

import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from ._backend import kernels
from .distributions import StepDistribution
from .functionals import functionals
from .rng import RngStream, stream_keys
from .space import DimensionError, SpaceSpec
from .stats import Z95, MomentAccumulator, binomial_se, sample_variance_se, wilson_interval

BLOCK = 4096
DEFAULT_CAP_FACTOR = 200.0
MAX_CAP = 10 ** 9
UNRELIABLE_CENSORED_FRACTION = 0.01


def default_threads() -> int:
    env = os.environ.get("EXITWALK_THREADS")
    if env:
        return max(1, int(env))
    return os.cpu_count() or 1


def _blocks(paths: int):
    return [(s, min(BLOCK, paths - s)) for s in range(0, paths, BLOCK)]


def _map_blocks(fn, paths: int, threads: int | None):
    blocks = _blocks(paths)
    threads = threads or default_threads()
    if threads <= 1 or len(blocks) <= 1:
        return [fn(s, c) for s, c in blocks]
    with ThreadPoolExecutor(max_workers=threads) as pool:
        return list(pool.map(lambda sc: fn(*sc), blocks))


def _check(dist, spec, r=None):
    if dist.d != spec.d:
        raise DimensionError(f"distribution has d={dist.d}, space has d={spec.d}")
    if r is not None:
        if not r > 0:
            raise ValueError("r must be positive")
        if not math.isfinite(r ** spec.p) or r ** spec.p > 1e300:
            raise ValueError(f"r^p overflows for r={r}, p={spec.p}")


@dataclass
class ExitSample:
    """One path: ``time`` is the exit index, or None when censored at ``cap``."""

    time: int | None
    cap: int

    @property
    def exited(self) -> bool:
        return self.time is not None


def simulate_exit(dist: StepDistribution, r: float, spec: SpaceSpec, cap: int,
                  rng: RngStream) -> ExitSample:
    """Walk until ||S_n|| > r (strict) or ``cap`` steps; advances ``rng``."""
    _check(dist, spec, r)
    if cap < 1:
        raise ValueError("cap must be >= 1")
    ks = dist.kernel_spec()
    keys = np.array([rng.key], dtype=np.uint64)
    t = int(kernels.exit_times(*ks.args(), keys, rng.counter, spec.p, float(r), int(cap), 0.0)[0])
    rng.advance((t if t else cap) * ks.words_per_step)
    return ExitSample(t if t else None, int(cap))


def exit_time_array(dist: StepDistribution, r: float, spec: SpaceSpec, paths: int, cap: int,
                    seed: int, threads: int | None = None, truncate: bool = False) -> np.ndarray:
    """Exit times of paths ``0 .. paths - 1`` (0 = censored)."""
    _check(dist, spec, r)
    ks = dist.kernel_spec()
    trunc = 3.0 * r if truncate else 0.0

    def run(start, count):
        keys = stream_keys(seed, start, count)
        return kernels.exit_times(*ks.args(), keys, 0, spec.p, float(r), int(cap), trunc)

    parts = _map_blocks(run, paths, threads)
    return np.concatenate(parts) if parts else np.zeros(0, dtype=np.int64)


def auto_cap(dist: StepDistribution, r: float, spec: SpaceSpec, factor: float = DEFAULT_CAP_FACTOR,
             n_mc: int = 10 ** 5, seed: int = 0) -> int:
    """ceil(factor / h(r)), with h exact when possible."""
    h = functionals(dist, r, spec, n_mc, seed).h
    if h <= 0:
        return MAX_CAP
    return int(min(MAX_CAP, math.ceil(factor / h)))


@dataclass
class TailRow:
    n: int
    p_gt: float
    ci_lo: float
    ci_hi: float
    se: float


@dataclass
class ExitTimeEstimate:
    r: float
    paths: int
    mean_T: float
    var_T: float
    se_T: float
    ci_halfwidth: float
    censored: int
    cap: int
    tail: list
    seed: int
    times: np.ndarray = field(repr=False, default=None)

    @property
    def mean_is_lower_bound(self) -> bool:
        return self.censored > 0

    @property
    def reliable(self) -> bool:
        return self.censored <= UNRELIABLE_CENSORED_FRACTION * self.paths

    def count_gt(self, n: int) -> int:
        """Paths with T > n (censored paths count for every n <= cap)."""
        if n > self.cap:
            raise ValueError(f"P(T > {n}) is not identified beyond the cap {self.cap}")
        t = self.times
        return int(np.count_nonzero((t == 0) | (t > n)))

    def p_gt(self, n: int) -> float:
        return self.count_gt(n) / self.paths

    def p_le(self, n: int) -> float:
        return 1.0 - self.p_gt(n)

    def tail_row(self, n: int) -> TailRow:
        k = self.count_gt(n)
        lo, hi = wilson_interval(k, self.paths)
        return TailRow(int(n), k / self.paths, lo, hi, binomial_se(k / self.paths, self.paths))

    def row(self) -> dict:
        return {"r": self.r, "paths": self.paths, "mean_T": self.mean_T,
                "ci": self.ci_halfwidth, "censored": self.censored, "cap": self.cap,
                "seed": self.seed}


def tail_grid(mean_T: float, cap: int) -> list[int]:
    """{1, 2, 4, ...} up to the cap together with round(q * mean) for q in (0.5, 1, 2, 4)."""
    grid = set()
    n = 1
    while n <= cap:
        grid.add(n)
        n *= 2
    for q in (0.5, 1.0, 2.0, 4.0):
        m = int(round(q * mean_T))
        if 1 <= m <= cap:
            grid.add(m)
    return sorted(grid)


def summarize_exit_times(times: np.ndarray, r: float, cap: int, seed: int,
                         grid: list[int] | None = None) -> ExitTimeEstimate:
    acc = MomentAccumulator()
    for start in range(0, len(times), BLOCK):
        block = times[start:start + BLOCK]
        acc.update(block[block > 0].astype(float))
    paths = len(times)
    censored = int(np.count_nonzero(times == 0))
    mean = acc.mean if acc.n else float("nan")
    se = acc.se if acc.n else float("nan")
    est = ExitTimeEstimate(float(r), paths, mean, acc.var, se, Z95 * se, censored, int(cap),
                           [], int(seed), times)
    if grid is None:
        grid = tail_grid(mean if acc.n else cap, cap)
    est.tail = [est.tail_row(n) for n in grid if n <= cap]
    return est


def estimate_exit_time(dist: StepDistribution, r: float, spec: SpaceSpec, paths: int,
                       cap: int | None = None, seed: int = 0, threads: int | None = None,
                       grid: list[int] | None = None) -> ExitTimeEstimate:
    """Monte Carlo summary of T_r over ``paths`` independent walks."""
    if paths < 100:
        raise ValueError("estimate_exit_time needs at least 100 paths")
    if cap is None:
        cap = auto_cap(dist, r, spec, seed=seed)
    times = exit_time_array(dist, r, spec, paths, cap, seed, threads)
    return summarize_exit_times(times, r, cap, seed, grid)


@dataclass
class TruncationCheck:
    r: float
    paths: int
    mismatches: int
    censored: int
    passed: bool


def exit_equals_truncated_exit(dist: StepDistribution, r: float, spec: SpaceSpec, paths: int,
                               seed: int, cap: int | None = None,
                               threads: int | None = None) -> TruncationCheck:
    """Paired raw and 3r-truncated walks on the same streams must exit together."""
    if cap is None:
        cap = auto_cap(dist, r, spec, seed=seed)
    raw = exit_time_array(dist, r, spec, paths, cap, seed, threads)
    cut = exit_time_array(dist, r, spec, paths, cap, seed, threads, truncate=True)
    mism = int(np.count_nonzero(raw != cut))
    return TruncationCheck(float(r), paths, mism, int(np.count_nonzero(raw == 0)), mism == 0)


@dataclass
class SnStats:
    n: int
    mean_norm: float
    mean_norm_sq: float
    var_norm: float
    se_mean: float
    se_norm_sq: float
    se_var: float


def norm_array(dist: StepDistribution, spec: SpaceSpec, n_grid, paths: int, seed: int,
               threads: int | None = None) -> np.ndarray:
    """||S_n|| for each path (rows) and each n of ``n_grid`` (columns)."""
    _check(dist, spec)
    grid = np.asarray(sorted(set(int(n) for n in n_grid)), dtype=np.int64)
    if len(grid) == 0 or grid[0] < 1:
        raise ValueError("n_grid must contain positive integers")
    ks = dist.kernel_spec()

    def run(start, count):
        return kernels.norm_trajectories(*ks.args(), stream_keys(seed, start, count), 0,
                                         spec.p, grid)

    return np.concatenate(_map_blocks(run, paths, threads), axis=0)


def sn_statistics(dist: StepDistribution, spec: SpaceSpec, n_grid, paths: int, seed: int,
                  threads: int | None = None) -> list[SnStats]:
    grid = sorted(set(int(n) for n in n_grid))
    norms = norm_array(dist, spec, grid, paths, seed, threads)
    out = []
    for j, n in enumerate(grid):
        x = norms[:, j]
        sq = x * x
        out.append(SnStats(n, float(x.mean()), float(sq.mean()), float(x.var(ddof=1)),
                           float(x.std(ddof=1) / math.sqrt(paths)),
                           float(sq.std(ddof=1) / math.sqrt(paths)), sample_variance_se(x)))
    return out
