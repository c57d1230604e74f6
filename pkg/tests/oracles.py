"""Reference values computed without touching the package's engine.

Each oracle takes a different route from the code it checks: exact rational
arithmetic, dense Markov-chain solves, or quadrature at high precision.
"""
from __future__ import annotations

import math
from fractions import Fraction

import mpmath
import numpy as np
from scipy import stats


def lattice_exit_moments(r: float, jumps: dict[int, float]) -> tuple[float, float]:
    """E T and E T^2 for an integer walk started at 0, T = min{n : |S_n| > r}.

    ``jumps`` maps integer increments to probabilities.  States are the
    integers in [-floor(r), floor(r)]; the chain is solved densely.
    """
    m = int(math.floor(r))
    states = np.arange(-m, m + 1)
    idx = {int(s): i for i, s in enumerate(states)}
    n = len(states)
    P = np.zeros((n, n))
    for s in states:
        for j, q in jumps.items():
            t = int(s) + j
            if abs(t) <= r:
                P[idx[int(s)], idx[t]] += q
    A = np.eye(n) - P
    m1 = np.linalg.solve(A, np.ones(n))
    # E T^2 = 1 + 2 E[T' | one step] + E[T'^2]  =>  (I - P) m2 = 1 + 2 P m1
    m2 = np.linalg.solve(A, np.ones(n) + 2 * P @ m1)
    return float(m1[idx[0]]), float(m2[idx[0]])


def gamblers_ruin_mean(r: float) -> float:
    """Dense-solve E T_r for the simple +-1 walk."""
    return lattice_exit_moments(r, {1: 0.5, -1: 0.5})[0]


def q2_sides_exact(values, probs, r) -> tuple[Fraction, Fraction]:
    """Both sides of G(r) + K(r) = r^-2 int_0^r 2u G(u) du in exact rationals.

    ``values`` are the atoms of ||X|| (rational), ``probs`` their masses.
    G is right-continuous: G(u) = P(||X|| > u).
    """
    vals = [Fraction(v) for v in values]
    ps = [Fraction(q) for q in probs]
    r = Fraction(r)
    lhs = sum(q for v, q in zip(vals, ps) if v > r) + \
        sum(q * v * v for v, q in zip(vals, ps) if v <= r) / (r * r)
    knots = sorted({Fraction(0), r} | {v for v in vals if 0 < v < r})
    integral = Fraction(0)
    for a, b in zip(knots, knots[1:]):
        g = sum(q for v, q in zip(vals, ps) if v > a)   # constant on (a, b]
        integral += g * (b * b - a * a)
    return lhs, integral / (r * r)


def gaussian_tail(r: float, sigma: float = 1.0) -> float:
    """P(|sigma g| > r) by mpmath at 30 digits."""
    with mpmath.workdps(30):
        return float(mpmath.erfc(mpmath.mpf(r) / (sigma * mpmath.sqrt(2))))


def gaussian_abs_moment_quad(p: float) -> float:
    """E|g|^p by mpmath quadrature of the density."""
    with mpmath.workdps(30):
        f = lambda x: abs(x) ** p * mpmath.exp(-x * x / 2) / mpmath.sqrt(2 * mpmath.pi)
        return float(mpmath.quad(f, [-mpmath.inf, 0, mpmath.inf]))


def gaussian_truncated_second(r: float, sigma: float = 1.0) -> float:
    """E(X^2; |X| <= r) for X ~ N(0, sigma^2), via scipy.stats.truncnorm."""
    a = r / sigma
    mass = stats.norm.cdf(a) - stats.norm.cdf(-a)
    return float(sigma ** 2 * stats.truncnorm(-a, a).moment(2) * mass)


def lp_norm_exact(x, p: float) -> float:
    """(sum |x_j|^p)^(1/p) at 50 digits."""
    with mpmath.workdps(50):
        s = mpmath.fsum(abs(mpmath.mpf(float(v))) ** p for v in x)
        return float(s ** (mpmath.mpf(1) / p))


def splitmix64_reference(key: int, i: int) -> int:
    """Word i of a stream, written out from the published SplitMix64 constants."""
    mask = (1 << 64) - 1
    z = (key + (i + 1) * 0x9E3779B97F4A7C15) & mask
    z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & mask
    z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & mask
    return z ^ (z >> 31)
