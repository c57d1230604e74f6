"""Truncated-moment functionals of a step law and their structural checks.

For r > 0::

    G(r) = P(||X|| > r)
    K(r) = r^-2 E(||X||^2; ||X|| <= r)
    M(r) = r^-1 E(X; ||X|| <= r)
    h(r) = G(r) + K(r) + ||M(r)||

Ties ``||X|| == r`` count towards K and M, never G.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy import integrate, special

from .distributions import (GaussianSteps, StepDistribution, iter_blocks, truncate_step)
from .space import DimensionError, SpaceSpec, lp_norm

H_TOL = 1e-12
Z_CHECK = 3.0


class NoClosedForm(LookupError):
    """The law of ||X|| is not available exactly; use ``functionals_mc``."""


@dataclass
class PruittFunctionals:
    r: float
    G: float
    K: float
    M: np.ndarray
    M_norm: float
    h: float
    source: str = "analytic"
    samples: int = 0
    se_G: float = 0.0
    se_K: float = 0.0
    se_M: float = 0.0
    se_h: float = 0.0

    def __post_init__(self):
        if not self.r > 0:
            raise ValueError("r must be positive")
        if not -H_TOL <= self.G <= 1 + H_TOL:
            raise ValueError(f"G(r)={self.G} outside [0, 1]")
        if self.K < -H_TOL:
            raise ValueError(f"K(r)={self.K} negative")
        if self.M_norm > 1 + H_TOL:
            raise ValueError(f"||M(r)||={self.M_norm} exceeds 1")
        if self.h > 2 + H_TOL:
            raise ValueError(f"h(r)={self.h} exceeds 2")

    @classmethod
    def build(cls, r, G, K, M, spec: SpaceSpec, **kw) -> "PruittFunctionals":
        M = np.asarray(M, dtype=float)
        m_norm = float(lp_norm(M, spec))
        return cls(float(r), float(G), float(K), M, m_norm, float(G) + float(K) + m_norm, **kw)

    @property
    def ci_halfwidths(self) -> dict:
        return {"G": 1.96 * self.se_G, "K": 1.96 * self.se_K, "M": 1.96 * self.se_M,
                "h": 1.96 * self.se_h}

    def row(self) -> dict:
        ci = self.ci_halfwidths
        return {"r": self.r, "G": self.G, "K": self.K, "M_norm": self.M_norm, "h": self.h,
                "source": self.source, "ci_G": ci["G"], "ci_K": ci["K"], "ci_M": ci["M"]}


def geometric_grid(lo: float, hi: float | None = None, points: int | None = None,
                   ratio: float = 2 ** 0.25) -> np.ndarray:
    """Geometric r grid from ``lo``: to ``hi`` in ``points`` steps, or ``points`` steps of ``ratio``."""
    if lo <= 0:
        raise ValueError("grid must start at a positive r")
    if hi is not None and points is not None:
        return np.geomspace(lo, hi, int(points))
    if points is not None:
        return lo * ratio ** np.arange(int(points))
    if hi is None:
        raise ValueError("give hi, points or both")
    n = int(math.floor(math.log(hi / lo) / math.log(ratio) + 1e-9)) + 1
    return lo * ratio ** np.arange(n)


def _check_dims(dist, spec):
    if dist.d != spec.d:
        raise DimensionError(f"distribution has d={dist.d}, space has d={spec.d}")


def _gaussian_scalar(sigma: float, r: float):
    a = r / sigma
    G = float(special.erfc(a / math.sqrt(2)))
    phi = math.exp(-a * a / 2) / math.sqrt(2 * math.pi)
    trunc2 = sigma * sigma * (float(special.erf(a / math.sqrt(2))) - 2 * a * phi)
    return G, trunc2 / (r * r)


def functionals_analytic(dist: StepDistribution, r: float, spec: SpaceSpec) -> PruittFunctionals:
    """Exact G, K, M, h from the discrete law of ||X|| (or the scalar Gaussian)."""
    _check_dims(dist, spec)
    if r <= 0:
        raise ValueError("r must be positive")
    if isinstance(dist, GaussianSteps) and dist.scalar_sigma is not None:
        G, K = _gaussian_scalar(dist.scalar_sigma, r)
        return PruittFunctionals.build(r, G, K, np.zeros(spec.d), spec)
    law = dist.norm_law(spec.p)
    if law is None:
        raise NoClosedForm(f"{dist.variant}: no exact law of ||X||; use functionals_mc")
    vals, probs = law
    inside = vals <= r
    G = math.fsum(probs[~inside])
    K = math.fsum(probs[inside] * vals[inside] ** 2) / (r * r)
    if dist.symmetric:
        M = np.zeros(spec.d)
    else:
        at = dist.atoms()
        if at is None:
            raise NoClosedForm(f"{dist.variant}: truncated mean needs an enumerable law")
        pts, pr = at
        keep = np.atleast_1d(lp_norm(pts, spec)) <= r
        M = np.array([math.fsum(col) for col in (pts[keep] * pr[keep, None]).T]) / r \
            if np.any(keep) else np.zeros(spec.d)
    return PruittFunctionals.build(r, G, K, M, spec)


def has_closed_form(dist: StepDistribution, spec: SpaceSpec) -> bool:
    try:
        functionals_analytic(dist, 1.0, spec)
    except NoClosedForm:
        return False
    return True


def functionals_mc_grid(dist: StepDistribution, r_grid, spec: SpaceSpec, n: int = 10 ** 6,
                        seed: int = 0) -> list[PruittFunctionals]:
    """Plug-in estimates on a common sample for every r of the grid.

    For each r the per-sample statistic z = (1{||x||>r}, ||x||^2 1{||x||<=r}/r^2,
    x 1{||x||<=r}/r) is accumulated with its Gram matrix, so the h interval is
    computed from the summed per-sample statistic rather than by adding intervals.
    """
    _check_dims(dist, spec)
    if n < 1000:
        raise ValueError("functionals_mc needs n >= 1000")
    r_grid = np.atleast_1d(np.asarray(r_grid, dtype=float))
    d = spec.d
    sums = np.zeros((len(r_grid), d + 2))
    grams = np.zeros((len(r_grid), d + 2, d + 2))
    for x in iter_blocks(dist, seed, n):
        nrm = np.atleast_1d(lp_norm(x, spec))
        for i, r in enumerate(r_grid):
            inside = nrm <= r
            z = np.empty((len(x), d + 2))
            z[:, 0] = ~inside
            z[:, 1] = np.where(inside, nrm * nrm, 0.0) / (r * r)
            z[:, 2:] = np.where(inside[:, None], x, 0.0) / r
            sums[i] += z.sum(axis=0)
            grams[i] += z.T @ z
    out = []
    for i, r in enumerate(r_grid):
        mean = sums[i] / n
        cov = (grams[i] / n - np.outer(mean, mean)) * (n / (n - 1))
        cov = (cov + cov.T) / 2
        var = np.clip(np.diag(cov), 0, None)
        G, K, M = mean[0], mean[1], mean[2:]
        m_norm = float(lp_norm(M, spec))
        if m_norm > 0:
            a = np.abs(M) / m_norm
            u = np.sign(M) * (a ** (spec.p - 1))
            se_M = math.sqrt(max(u @ cov[2:, 2:] @ u, 0.0) / n)
            w = np.concatenate([[1.0, 1.0], u])
            se_h = math.sqrt(max(w @ cov @ w, 0.0) / n)
        else:
            se_M = float(lp_norm(np.sqrt(var[2:] / n), spec))
            w = np.array([1.0, 1.0])
            se_h = math.sqrt(max(w @ cov[:2, :2] @ w, 0.0) / n) + se_M
        out.append(PruittFunctionals.build(
            r, G, K, M, spec, source="mc", samples=n, se_G=math.sqrt(var[0] / n),
            se_K=math.sqrt(var[1] / n), se_M=se_M, se_h=se_h))
    return out


def functionals_mc(dist: StepDistribution, r: float, spec: SpaceSpec, n: int = 10 ** 6,
                   seed: int = 0) -> PruittFunctionals:
    return functionals_mc_grid(dist, [r], spec, n, seed)[0]


def functionals(dist: StepDistribution, r: float, spec: SpaceSpec, n_mc: int = 10 ** 6,
                seed: int = 0) -> PruittFunctionals:
    """Exact functionals when available, Monte Carlo otherwise."""
    try:
        return functionals_analytic(dist, r, spec)
    except NoClosedForm:
        return functionals_mc(dist, r, spec, n_mc, seed)


def functionals_grid(dist: StepDistribution, r_grid, spec: SpaceSpec, n_mc: int = 10 ** 6,
                     seed: int = 0) -> list[PruittFunctionals]:
    if has_closed_form(dist, spec):
        return [functionals_analytic(dist, r, spec) for r in r_grid]
    return functionals_mc_grid(dist, r_grid, spec, n_mc, seed)


# -- identity and regularity checks --------------------------------------------

@dataclass
class Q2Report:
    r: float
    lhs: float          # G(r) + K(r)
    rhs: float          # r^-2 int_0^r 2u G(u) du
    residual: float
    source: str
    passed: bool


def _step_integral(vals: np.ndarray, probs: np.ndarray, r: float) -> float:
    """int_0^r 2u G(u) du for the right-continuous step function G."""
    u, inv = np.unique(vals, return_inverse=True)
    w = np.bincount(inv.ravel(), weights=probs, minlength=len(u))
    tail = np.append(np.cumsum(w[::-1])[::-1], 0.0)   # tail[i] = P(||X|| >= u_i)
    knots = np.unique(np.concatenate([[0.0], u[(u > 0) & (u < r)], [r]]))
    a, b = knots[:-1], knots[1:]
    g = tail[np.searchsorted(u, a, side="right")]      # G on (a, b]
    return math.fsum(g * (b * b - a * a))


def check_q2_identity(dist: StepDistribution, r: float, spec: SpaceSpec, tol: float = 1e-12,
                      n_mc: int = 10 ** 6, seed: int = 0) -> Q2Report:
    """Residual of G(r) + K(r) = r^-2 int_0^r 2u G(u) du.

    Discrete laws integrate G exactly piece by piece; the scalar Gaussian uses
    adaptive quadrature; otherwise the empirical law of ``n_mc`` draws is used
    and both sides refer to that empirical law.
    """
    _check_dims(dist, spec)
    if isinstance(dist, GaussianSteps) and dist.scalar_sigma is not None:
        sigma = dist.scalar_sigma
        f = functionals_analytic(dist, r, spec)
        val, _ = integrate.quad(lambda u: 2 * u * special.erfc(u / sigma / math.sqrt(2)), 0, r,
                                epsabs=1e-15, epsrel=1e-12, limit=400)
        lhs, rhs, source = f.G + f.K, val / (r * r), "analytic"
    else:
        law = dist.norm_law(spec.p)
        source = "analytic"
        if law is None:
            norms = np.concatenate([np.atleast_1d(lp_norm(x, spec))
                                    for x in iter_blocks(dist, seed, n_mc)])
            law = (np.sort(norms), np.full(len(norms), 1.0 / len(norms)))
            source = "mc"
        vals, probs = law
        inside = vals <= r
        lhs = math.fsum(probs[~inside]) + math.fsum(probs[inside] * vals[inside] ** 2) / (r * r)
        rhs = _step_integral(vals, probs, r) / (r * r)
    res = abs(lhs - rhs)
    return Q2Report(float(r), lhs, rhs, res, source, res <= tol)


@dataclass
class HdCheck:
    r: float
    s: float
    ratio: float
    lower: float
    upper: float
    margin_lower: float
    margin_upper: float
    passed: bool


def check_hd_bounds(f_r: PruittFunctionals, f_s: PruittFunctionals, z: float = Z_CHECK) -> HdCheck:
    """r^2 / (2 s^2) <= h(s) / h(r) <= 2 for r <= s, with MC inputs inflated by z s.e."""
    r, s = f_r.r, f_s.r
    if r > s:
        raise ValueError("need r <= s")
    ratio = f_s.h / f_r.h
    rel = math.hypot(f_r.se_h / f_r.h, f_s.se_h / f_s.h)
    slack = z * ratio * rel + H_TOL
    lower, upper = r * r / (2 * s * s), 2.0
    m_lo = ratio - lower + slack
    m_hi = upper - ratio + slack
    return HdCheck(r, s, ratio, lower, upper, m_lo, m_hi, m_lo >= 0 and m_hi >= 0)


@dataclass
class HLimitReport:
    norm_sq: float
    rows: list            # (r, r^2 h(r) / E||X||^2)
    terminal_ratio: float
    monotone: bool
    passed: bool
    tol: float
    h_at_rmin: float = float("nan")
    G_at_rmin: float = float("nan")
    p_nonzero: float = float("nan")
    notes: list = field(default_factory=list)


def check_h_limit(dist: StepDistribution, spec: SpaceSpec, r_grid, tol: float = 0.05,
                  n_mc: int = 10 ** 6, seed: int = 0) -> HLimitReport:
    """Table of r^2 h(r) / E||X||^2 over the grid; passes when the last entry is within tol of 1."""
    _check_dims(dist, spec)
    mean = dist.mean()
    if mean is None or np.any(mean != 0):
        raise ValueError(f"{dist.variant}: step law is not centered; the r^2 h(r) limit needs EX = 0")
    e2 = dist.expected_norm_sq(spec.p)
    if e2 is None:
        raise ValueError(f"{dist.variant}: no closed-form E||X||^2 for p={spec.p:g}")
    r_grid = np.sort(np.asarray(r_grid, dtype=float))
    fs = functionals_grid(dist, r_grid, spec, n_mc, seed)
    rows = [(f.r, f.r * f.r * f.h / e2) for f in fs]
    ratios = [x for _, x in rows]
    monotone = all(b >= a - H_TOL for a, b in zip(ratios, ratios[1:]))
    notes = [] if monotone else ["approach to the limit is not monotone on this grid"]
    law = dist.norm_law(spec.p)
    p_nonzero = float(np.sum(law[1][law[0] > 0])) if law is not None else float("nan")
    return HLimitReport(e2, rows, ratios[-1], monotone, abs(ratios[-1] - 1) <= tol, tol,
                        fs[0].h, fs[0].G, p_nonzero, notes)


@dataclass
class TruncatedMomentReport:
    r: float
    mc_value: float       # MC E||Xhat||^2
    mc_se: float
    identity_value: float  # 9 r^2 (G(3r) + K(3r))
    identity_se: float
    residual: float
    passed: bool


def truncated_moment_identity(dist: StepDistribution, r: float, spec: SpaceSpec,
                              n: int = 10 ** 6, seed: int = 0, z: float = Z_CHECK
                              ) -> TruncatedMomentReport:
    """Compare MC E||Xhat||^2 with 9 r^2 (G(3r) + K(3r)) from the functionals."""
    from .stats import MomentAccumulator

    _check_dims(dist, spec)
    acc = MomentAccumulator()
    for x in iter_blocks(dist, seed, n):
        acc.update(np.atleast_1d(lp_norm(truncate_step(x, r, spec), spec)) ** 2)
    try:
        f = functionals_analytic(dist, 3 * r, spec)
        se_gk = 0.0
    except NoClosedForm:
        f = functionals_mc(dist, 3 * r, spec, n, seed ^ 0x5A5A5A5A)
        se_gk = math.hypot(f.se_G, f.se_K)
    ident = 9 * r * r * (f.G + f.K)
    ident_se = 9 * r * r * se_gk
    res = acc.mean - ident
    slack = z * math.hypot(acc.se, ident_se) + 1e-12 * max(1.0, abs(ident))
    return TruncatedMomentReport(float(r), acc.mean, acc.se, ident, ident_se, res,
                                 abs(res) <= slack)
