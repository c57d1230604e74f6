"""Experiment suites.

Each ``run_*`` function simulates what it needs, evaluates a set of bound
checks and returns tables for CSV output.  A bound ``lhs <= rhs`` fails only
when ``lhs - rhs`` exceeds ``z`` combined standard errors (z = 3 by default);
exact quantities carry zero standard error.

Jobs inside a suite run one after another in a fixed order; parallelism lives
inside the simulator (path blocks), so results never depend on scheduling.
"""
from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field

import numpy as np

from .distributions import (FixedSubsetRademacher, RandomSubsetRademacher, StepDistribution,
                            TypeWitness, gaussian_associate, iter_blocks, mc_moments,
                            truncate_step)
from .functionals import (NoClosedForm, PruittFunctionals, check_h_limit, check_hd_bounds,
                          check_q2_identity, functionals_analytic, functionals_grid,
                          functionals_mc, functionals_mc_grid, geometric_grid, has_closed_form,
                          truncated_moment_identity)
from .rng import derive_seed
from .simulator import (DEFAULT_CAP_FACTOR, MAX_CAP, ExitTimeEstimate, estimate_exit_time,
                        exit_equals_truncated_exit, sn_statistics)
from .space import SpaceSpec, lp_norm
from .stats import MomentAccumulator, binomial_se, loglog_slope

log = logging.getLogger(__name__)

Z = 3.0
EXACT_TOL = 1e-12


# -- results -----------------------------------------------------------------

@dataclass
class BoundPoint:
    label: str
    lhs: float
    rhs: float
    se: float = 0.0

    @property
    def margin(self) -> float:
        return self.rhs - self.lhs

    def ok(self, z: float) -> bool:
        return self.margin + z * self.se + EXACT_TOL * max(1.0, abs(self.rhs)) >= 0


@dataclass
class BoundCheckResult:
    """One bound evaluated at several points; fails only beyond ``z`` standard errors."""

    bound_id: str
    points: list = field(default_factory=list)
    z: float = Z
    informational: bool = False
    notes: list = field(default_factory=list)
    constants: dict = field(default_factory=dict)

    def add(self, label, lhs, rhs, se=0.0):
        self.points.append(BoundPoint(str(label), float(lhs), float(rhs), float(se)))

    @property
    def failures(self) -> list:
        return [p for p in self.points if not p.ok(self.z)]

    @property
    def worst(self) -> BoundPoint | None:
        if not self.points:
            return None
        return min(self.points, key=lambda p: p.margin + self.z * p.se)

    @property
    def passed(self) -> bool:
        return self.informational or not self.failures

    def summary(self) -> dict:
        w = self.worst
        return {"id": self.bound_id, "passed": self.passed, "informational": self.informational,
                "points": len(self.points), "failures": len(self.failures),
                "worst_label": w.label if w else None,
                "worst_margin": w.margin if w else None,
                "worst_se": w.se if w else None, "z": self.z,
                "constants": self.constants, "notes": self.notes}


@dataclass
class PlotData:
    """Gnuplot data: one ``# label`` block per curve, blocks separated by two blank lines."""

    title: str
    columns: list
    blocks: list = field(default_factory=list)   # (label, rows)


@dataclass
class SuiteResult:
    suite: str
    checks: list = field(default_factory=list)
    tables: dict = field(default_factory=dict)
    plots: dict = field(default_factory=dict)
    constants: dict = field(default_factory=dict)
    notes: list = field(default_factory=list)

    @property
    def passed(self) -> bool:
        return all(c.passed for c in self.checks)

    def summary(self) -> dict:
        return {"passed": self.passed, "checks": [c.summary() for c in self.checks],
                "constants": self.constants, "notes": self.notes}


@dataclass(frozen=True)
class CapPolicy:
    """Step cap: ``fixed`` when given, else ceil(factor / h(r))."""

    factor: float = DEFAULT_CAP_FACTOR
    fixed: int | None = None

    def cap(self, h: float) -> int:
        if self.fixed is not None:
            return int(self.fixed)
        return MAX_CAP if h <= 0 else int(min(MAX_CAP, math.ceil(self.factor / h)))


def _label(dist: StepDistribution) -> str:
    return f"{dist.variant}[d={dist.d}]"


def _space(dist: StepDistribution, p: float) -> SpaceSpec:
    return SpaceSpec(dist.d, p)


def _estimate(dist, r, spec, f: PruittFunctionals, paths, seed, cap: CapPolicy, threads):
    return estimate_exit_time(dist, r, spec, paths, cap=cap.cap(f.h), seed=seed, threads=threads)


def _product(f: PruittFunctionals, est: ExitTimeEstimate) -> tuple[float, float]:
    """h(r) * E T_r with a propagated standard error."""
    prod = f.h * est.mean_T
    rel = math.hypot(f.se_h / f.h if f.h else 0.0, est.se_T / est.mean_T if est.mean_T else 0.0)
    return prod, prod * rel


def _ratio_se(a, sa, b, sb) -> tuple[float, float]:
    q = a / b
    return q, q * math.hypot(sa / a if a else 0.0, sb / b if b else 0.0)


def _top_half(values):
    values = list(values)
    return values[len(values) // 2:]


def _exit_rows(name, est: ExitTimeEstimate) -> dict:
    return {"dist": name, **est.row(), "reliable": int(est.reliable)}


def _tail_rows(name, est: ExitTimeEstimate) -> list[dict]:
    return [{"dist": name, "r": est.r, "n": t.n, "p_gt": t.p_gt, "ci_lo": t.ci_lo,
             "ci_hi": t.ci_hi} for t in est.tail]


def _functional_rows(name, fs) -> list[dict]:
    return [{"dist": name, **f.row()} for f in fs]


# -- functionals -------------------------------------------------------------

def _null_se(dist, f: PruittFunctionals, spec: SpaceSpec, n: int) -> tuple[float, float]:
    """Standard errors of the plug-in G and K when the exact values are true.

    A rare tail can give zero hits in the sample and hence a zero sample
    variance; the null variance does not have that blind spot.
    """
    se_G = math.sqrt(max(f.G * (1 - f.G), 0.0) / n)
    law = dist.norm_law(spec.p)
    if law is None:
        return se_G, 0.0
    vals, probs = law
    q = np.where(vals <= f.r, vals ** 2 / f.r ** 2, 0.0)
    return se_G, math.sqrt(max(float(probs @ q ** 2) - f.K ** 2, 0.0) / n)


def run_functionals_suite(dists, p: float, r_grid, seed: int, hd_pairs: int = 200,
                          n_mc: int = 10 ** 6, moment_samples: int = 10 ** 6,
                          h_limit_tol: float = 0.05, z: float = Z) -> SuiteResult:
    """Structural identities of the functionals for every distribution.

    Checks h <= 2, the integration-by-parts identity, monotonicity of G and of
    r^2 (G + K), agreement of Monte Carlo with closed forms, the regularity
    bounds on random pairs r <= s, the r^2 h(r) limit and the truncated
    second-moment identity.
    """
    r_grid = np.sort(np.asarray(r_grid, dtype=float))
    res = SuiteResult("functionals")
    c_h2 = BoundCheckResult("h_le_2", z=z)
    c_q2 = BoundCheckResult("q2_identity", z=z)
    c_mono = BoundCheckResult("monotone_G_and_r2GK", z=z)
    c_mc = BoundCheckResult("mc_matches_analytic", z=4.0)
    c_hd = BoundCheckResult("hd_bounds", z=z)
    c_lim = BoundCheckResult("h_limit", z=z)
    c_qx = BoundCheckResult("truncated_moment_check", z=z)
    c_small = BoundCheckResult("h_bounded_below_near_0", z=z)
    rows, lim_rows = [], []
    rng = np.random.default_rng(derive_seed(seed, "functionals", "hd_pairs"))
    fine = {}
    for i, dist in enumerate(dists):
        spec = _space(dist, p)
        name = _label(dist)
        s_mc = derive_seed(seed, "functionals", i)
        fs = functionals_grid(dist, r_grid, spec, n_mc, s_mc)
        rows += _functional_rows(name, fs)
        for f in fs:
            c_h2.add(f"{name} r={f.r:g}", f.h, 2.0, f.se_h)
            q = check_q2_identity(dist, f.r, spec, n_mc=n_mc, seed=s_mc)
            c_q2.add(f"{name} r={f.r:g} ({q.source})", q.residual, EXACT_TOL)
        for a, b in zip(fs, fs[1:]):
            c_mono.add(f"{name} G r={b.r:g}", b.G, a.G, math.hypot(a.se_G, b.se_G))
            ga, gb = a.r ** 2 * (a.G + a.K), b.r ** 2 * (b.G + b.K)
            c_mono.add(f"{name} r2(G+K) r={b.r:g}", ga, gb,
                       math.hypot(a.r ** 2 * math.hypot(a.se_G, a.se_K),
                                  b.r ** 2 * math.hypot(b.se_G, b.se_K)))
        if has_closed_form(dist, spec):
            for f, m in zip(fs, functionals_mc_grid(dist, r_grid, spec, n_mc, s_mc)):
                se_G, se_K = _null_se(dist, f, spec, n_mc)
                for key, se in (("G", max(se_G, m.se_G)), ("K", max(se_K, m.se_K)),
                                ("M_norm", m.se_M)):
                    diff = abs(getattr(m, key) - getattr(f, key))
                    c_mc.add(f"{name} {key} r={f.r:g}", diff, 0.0, se)
        # regularity pairs are drawn later from a fine grid per distribution
        fgrid = geometric_grid(r_grid[0] / 4, r_grid[-1], 33)
        fine[i] = functionals_grid(dist, fgrid, spec, n_mc, derive_seed(seed, "functionals", i, "fine"))
        law = dist.norm_law(p)
        if law is not None and np.any(law[0] > 0):
            # below the smallest positive norm G equals P(||X|| > 0)
            r0 = 0.5 * float(np.min(law[0][law[0] > 0]))
            f0 = functionals_analytic(dist, r0, spec)
            p0 = math.fsum(law[1][law[0] > 0])
            c_small.add(f"{name} h r={r0:g}", f0.G, f0.h)
            c_small.add(f"{name} G r={r0:g}", p0, f0.G)
        mean = dist.mean()
        e2 = dist.expected_norm_sq(p)
        if mean is not None and not np.any(mean) and e2 is not None and not dist.degenerate:
            rep = check_h_limit(dist, spec, r_grid, h_limit_tol, n_mc, s_mc)
            lim_rows += [{"dist": name, "r": r, "r2h_over_EX2": v} for r, v in rep.rows]
            se = fs[-1].se_h * fs[-1].r ** 2 / e2
            c_lim.add(f"{name} r={r_grid[-1]:g}", abs(rep.terminal_ratio - 1.0), h_limit_tol, se)
            if not rep.monotone:
                c_lim.notes.append(f"{name}: approach to the limit is not monotone")
        for j, r in enumerate(r_grid):
            t = truncated_moment_identity(dist, r, spec, moment_samples,
                                          derive_seed(seed, "functionals", i, "qx", j), z)
            c_qx.add(f"{name} r={r:g}", abs(t.residual), 0.0, math.hypot(t.mc_se, t.identity_se))
    for _ in range(hd_pairs):
        i = int(rng.integers(len(dists)))
        a, b = sorted(rng.integers(0, len(fine[i]), size=2))
        hd = check_hd_bounds(fine[i][a], fine[i][b], z)
        lo, hi = hd.margin_lower, hd.margin_upper
        c_hd.add(f"{_label(dists[i])} r={hd.r:.6g} s={hd.s:.6g}", -min(lo, hi), 0.0)
    res.checks = [c_h2, c_q2, c_mono, c_mc, c_hd, c_lim, c_qx, c_small]
    res.tables["functionals"] = rows
    if lim_rows:
        res.tables["h_limit"] = lim_rows
    res.constants = {"max_q2_residual": max((pt.lhs for pt in c_q2.points), default=0.0),
                     "max_h": max((pt.lhs for pt in c_h2.points), default=0.0),
                     "hd_pairs": len(c_hd.points)}
    plot = PlotData("h(r) by distribution", ["r", "h", "G", "K", "M_norm"])
    for name in dict.fromkeys(r["dist"] for r in rows):
        plot.blocks.append((name, [[r["r"], r["h"], r["G"], r["K"], r["M_norm"]]
                                   for r in rows if r["dist"] == name]))
    res.plots["functionals"] = plot
    return res


# -- exit-time bounds ----------------------------------------------------------

def run_exit_suite(dists, p: float, r_grid, n_grid, paths: int, seed: int,
                   cap: CapPolicy = CapPolicy(), threads: int | None = None,
                   n_mc: int = 10 ** 6, sn_paths: int | None = None,
                   truncation_paths: int | None = None, z: float = Z) -> SuiteResult:
    """Markov and doubling bounds, submultiplicativity, 3r truncation and the
    variance inequality Var ||S_n|| <= 4 n E||X||^2."""
    res = SuiteResult("exit")
    c_markov = BoundCheckResult("markov_tail", z=z)
    c_double = BoundCheckResult("doubling", z=z)
    c_sub = BoundCheckResult("submultiplicative", z=z)
    c_trunc = BoundCheckResult("truncated_exit_equal", z=z)
    c_var = BoundCheckResult("variance_inequality", z=z)
    exit_rows, tail_rows, sn_rows = [], [], []
    for i, dist in enumerate(dists):
        spec = _space(dist, p)
        name = _label(dist)
        for j, r in enumerate(r_grid):
            r = float(r)
            f1 = functionals_analytic_or_mc(dist, r, spec, n_mc, derive_seed(seed, "exit", i, j, "h"))
            f2 = functionals_analytic_or_mc(dist, 2 * r, spec, n_mc, derive_seed(seed, "exit", i, j, "h2"))
            e1 = _estimate(dist, r, spec, f1, paths, derive_seed(seed, "exit", i, j, "T"), cap, threads)
            e2 = _estimate(dist, 2 * r, spec, f2, paths, derive_seed(seed, "exit", i, j, "T2"), cap, threads)
            exit_rows += [_exit_rows(name, e1), _exit_rows(name, e2)]
            tail_rows += _tail_rows(name, e1) + _tail_rows(name, e2)
            tp = truncation_paths or paths
            tc = exit_equals_truncated_exit(dist, r, spec, tp, derive_seed(seed, "exit", i, j, "hat"),
                                            cap=cap.cap(f1.h), threads=threads)
            c_trunc.add(f"{name} r={r:g}", tc.mismatches, 0.0)
            if not (e1.reliable and e2.reliable):
                msg = f"{name} r={r:g}: censored beyond 1%, bounds not asserted"
                for c in (c_markov, c_double, c_sub):
                    c.notes.append(msg)
                continue
            for t in e1.tail:
                n = t.n
                c_markov.add(f"{name} r={r:g} n={n}", t.p_gt, e1.mean_T / n,
                             math.hypot(t.se, e1.se_T / n))
                if n <= e2.cap:
                    q2 = e2.p_le(n)
                    c_double.add(f"{name} r={r:g} n={n}", q2, n / e1.mean_T,
                                 math.hypot(binomial_se(q2, e2.paths),
                                            n * e1.se_T / e1.mean_T ** 2))
                    g2 = e2.p_gt(n)
                    for k in (2, 3):
                        if k * n <= e1.cap:
                            g1 = e1.p_gt(k * n)
                            c_sub.add(f"{name} r={r:g} n={n} k={k}", g1, g2 ** k,
                                      math.hypot(binomial_se(g1, e1.paths),
                                                 k * g2 ** (k - 1) * binomial_se(g2, e2.paths)))
        if n_grid is not None and len(n_grid):
            ex2 = dist.expected_norm_sq(p)
            se2 = 0.0
            if ex2 is None:
                m = mc_moments(dist, spec, n_mc, derive_seed(seed, "exit", i, "EX2"))
                ex2, se2 = m.norm_sq, m.se["norm_sq"]
            stats = sn_statistics(dist, spec, n_grid, sn_paths or paths,
                                  derive_seed(seed, "exit", i, "Sn"), threads)
            for s in stats:
                sn_rows.append({"dist": name, "n": s.n, "mean_norm": s.mean_norm,
                                "mean_norm_sq": s.mean_norm_sq, "var_norm": s.var_norm,
                                "se_mean": s.se_mean, "se_norm_sq": s.se_norm_sq,
                                "se_var": s.se_var, "bound": 4 * s.n * ex2})
                c_var.add(f"{name} n={s.n}", s.var_norm, 4 * s.n * ex2,
                          math.hypot(s.se_var, 4 * s.n * se2))
    res.checks = [c_markov, c_double, c_sub, c_trunc, c_var]
    res.tables.update(exit=exit_rows, tail=tail_rows)
    if sn_rows:
        res.tables["sn"] = sn_rows
        res.constants["max_var_over_4nEX2"] = max(r["var_norm"] / r["bound"] for r in sn_rows)
    return res


def functionals_analytic_or_mc(dist, r, spec, n_mc, seed) -> PruittFunctionals:
    try:
        return functionals_analytic(dist, r, spec)
    except NoClosedForm:
        return functionals_mc(dist, r, spec, n_mc, seed)


# -- two-sided Pruitt estimates ----------------------------------------------

def _product_table(dist, spec, r_grid, paths, seed, cap, threads, n_mc, tag):
    """Rows (r, h, E T, product) for one distribution, and the estimates."""
    fs = functionals_grid(dist, r_grid, spec, n_mc, derive_seed(seed, tag, "h"))
    rows, ests = [], []
    for j, f in enumerate(fs):
        est = _estimate(dist, f.r, spec, f, paths, derive_seed(seed, tag, j), cap, threads)
        prod, se = _product(f, est)
        rows.append({"dist": _label(dist), "r": f.r, "h": f.h, "se_h": f.se_h,
                     "mean_T": est.mean_T, "ci_T": est.ci_halfwidth, "product": prod,
                     "ci_product": 1.96 * se, "se_product": se, "censored": est.censored,
                     "cap": est.cap, "reliable": int(est.reliable)})
        ests.append(est)
    return fs, ests, rows


def run_pruitt_suite(dists, p: float, r_grid, paths: int, seed: int, band: float = 10.0,
                     cap: CapPolicy = CapPolicy(), threads: int | None = None,
                     n_mc: int = 10 ** 6, z: float = Z) -> SuiteResult:
    """Sup and inf over the grid of h(r) E T_r and of the tail ratios.

    At p = 2 the band sup/inf must stay within ``band`` for each distribution
    and across all of them together (the constants do not depend on d).  For
    other p the constants are reported only.
    """
    res = SuiteResult("pruitt")
    hilbert = p == 2.0
    c_band = BoundCheckResult("product_band", z=z, informational=not hilbert)
    c_union = BoundCheckResult("product_band_all_d", z=z, informational=not hilbert)
    c_widen = BoundCheckResult("band_not_widening_in_d", z=z, informational=not hilbert)
    rows, tails = [], []
    plot = PlotData("h(r) E T_r against r", ["r", "product", "ci_product"])
    extremes = []
    per = {}
    for i, dist in enumerate(dists):
        name = _label(dist)
        if dist.degenerate:
            res.notes.append(f"{name}: degenerate step law excluded")
            continue
        spec = _space(dist, p)
        fs, ests, trows = _product_table(dist, spec, r_grid, paths, seed, cap, threads, n_mc,
                                         ("pruitt", i))
        good = [(f, e, t) for f, e, t in zip(fs, ests, trows) if t["reliable"]]
        for f, e, t in zip(fs, ests, trows):
            if not t["reliable"]:
                res.notes.append(f"{name} r={f.r:g}: censored beyond 1%, excluded")
        rows += trows
        plot.blocks.append((name, [[t["r"], t["product"], t["ci_product"]] for t in trows]))
        if not good:
            continue
        hi = max(good, key=lambda g: g[2]["product"])[2]
        lo = min(good, key=lambda g: g[2]["product"])[2]
        up_tail = max(t.n * t.p_gt * f.h for f, e, _ in good for t in e.tail)
        lo_tail = max((1 - t.p_gt) / (t.n * f.h) for f, e, _ in good for t in e.tail)
        q, se = _ratio_se(hi["product"], hi["se_product"], lo["product"], lo["se_product"])
        c_band.add(name, q, band, se)
        per[name] = {"sup_hET": hi["product"], "inf_hET": lo["product"], "band": q,
                     "se_band": se, "sup_n_P_gt_h": up_tail, "sup_P_le_over_nh": lo_tail,
                     "d": dist.d, "variant": dist.variant}
        extremes += [hi, lo]
        for f, e, _ in good:
            tails += [{"dist": name, "r": f.r, "n": t.n, "p_gt": t.p_gt,
                       "n_p_gt_h": t.n * t.p_gt * f.h, "p_le_over_nh": (1 - t.p_gt) / (t.n * f.h)}
                      for t in e.tail]
    if extremes:
        hi = max(extremes, key=lambda t: t["product"])
        lo = min(extremes, key=lambda t: t["product"])
        q, se = _ratio_se(hi["product"], hi["se_product"], lo["product"], lo["se_product"])
        c_union.add(f"{hi['dist']} / {lo['dist']}", q, band, se)
        res.constants["band_all"] = q
    # within a family, the band at larger d may not exceed the band at the smallest d
    for variant in dict.fromkeys(v["variant"] for v in per.values()):
        fam = sorted((v for v in per.values() if v["variant"] == variant), key=lambda v: v["d"])
        base = fam[0]
        for v in fam[1:]:
            if v["d"] > base["d"]:
                c_widen.add(f"{variant} d={v['d']} vs d={base['d']}", v["band"], base["band"],
                            math.hypot(v["se_band"], base["se_band"]))
    res.constants["per_distribution"] = per
    res.checks = [c_band, c_union] + ([c_widen] if c_widen.points else [])
    res.tables.update(pruitt=rows, pruitt_tail=tails)
    res.plots["pruitt"] = plot
    if not hilbert:
        res.notes.append(f"p={p:g}: two-sided bounds are not claimed; constants reported only")
    return res


# -- scaling ---------------------------------------------------------------------

def _plateau(rows) -> tuple[float, float]:
    """Median product over the top half of the r grid, with an approximate s.e."""
    top = _top_half(rows)
    vals = np.array([t["product"] for t in top])
    ses = np.array([t["se_product"] for t in top])
    return float(np.median(vals)), float(1.2533 * math.sqrt(np.mean(ses ** 2) / len(top)))


def _flatness(rows) -> tuple[float, float]:
    top = _top_half(rows)
    hi = max(top, key=lambda t: t["product"])
    lo = min(top, key=lambda t: t["product"])
    return _ratio_se(hi["product"], hi["se_product"], lo["product"], lo["se_product"])


def predicted_ratio(dist: StepDistribution, p: float) -> float | None:
    """E||X||^2 divided by the Gaussian-associate surrogate (sum_j v_j^(p/2))^(2/p)."""
    e2 = dist.expected_norm_sq(p)
    if e2 is None:
        return None
    ga = gaussian_associate(dist, _space(dist, p))
    return e2 / ga.second_moment_surrogate


@dataclass
class ScalingReport:
    p: float
    k: int
    d_list: list
    rows: list
    plateaus: dict                 # d -> (plateau, se)
    slope: float
    slope_se: float
    expected_slope: float
    slope_tol: float
    control_rows: list
    control_plateaus: dict         # k -> (plateau, se)
    predicted: dict                # d -> predicted ratio
    checks: list
    budget: float
    intercept: float = 0.0

    @property
    def passed(self) -> bool:
        return all(c.passed for c in self.checks)

    def to_suite(self) -> SuiteResult:
        tag = f"p{self.p:g}"
        res = SuiteResult("scaling", checks=list(self.checks))
        res.tables[f"scaling_{tag}"] = self.rows + self.control_rows
        res.tables[f"scaling_plateau_{tag}"] = (
            [{"family": "random_subset", "d": d, "k": self.k, "plateau": v, "se": s,
              "predicted": self.predicted.get(d)} for d, (v, s) in self.plateaus.items()]
            + [{"family": "fixed_subset", "d": k, "k": k, "plateau": v, "se": s,
                "predicted": 1.0} for k, (v, s) in self.control_plateaus.items()])
        res.constants = {tag: {"slope": self.slope, "slope_se": self.slope_se,
                               "expected_slope": self.expected_slope,
                               "plateaus": {str(d): v for d, (v, _) in self.plateaus.items()},
                               "control_plateaus": {str(k): v for k, (v, _) in
                                                    self.control_plateaus.items()}}}
        curves = PlotData(f"h(r) E T_r against r, p={self.p:g}", ["r", "product", "ci_product"])
        for fam, key in (("random_subset", "d"), ("fixed_subset", "k")):
            src = self.rows if fam == "random_subset" else self.control_rows
            for val in dict.fromkeys(t[key] for t in src):
                curves.blocks.append((f"{fam} {key}={val}", [[t["r"], t["product"], t["ci_product"]]
                                                            for t in src if t[key] == val]))
        fit = PlotData(f"plateau against d/k, p={self.p:g}", ["d_over_k", "plateau", "se", "fit"])
        b = self.intercept
        fit.blocks.append(("plateaus", [[d / self.k, v, s, math.exp(b) * (d / self.k) ** self.slope]
                                        for d, (v, s) in self.plateaus.items()]))
        res.plots[f"scaling_{tag}"] = curves
        res.plots[f"scaling_fit_{tag}"] = fit
        return res


def run_scaling_experiment(p: float, d_list, k: int, r_grid, paths: int, seed: int,
                           budget: float = 4.0, control_k=None, slope_tol: float | None = None,
                           cap: CapPolicy = CapPolicy(), threads: int | None = None) -> ScalingReport:
    """Plateau of h(r) E T_r for random k-subset steps against d, plus fixed-subset controls.

    The log-log slope of the plateau against d/k is compared with 1 - 2/p;
    every plateau must be flat within ``budget`` over the top half of the r
    grid, and the fixed-subset plateaus must agree across ``control_k``
    within ``budget``.
    """
    if p < 2:
        raise ValueError("scaling experiment needs p >= 2")
    d_list = [int(d) for d in d_list]
    if k > min(d_list):
        raise ValueError("k must not exceed min(d_list)")
    if len(d_list) < 3:
        raise ValueError("slope fit needs at least three d values")
    control_k = [int(c) for c in (control_k if control_k is not None else [k])]
    expected = 1.0 - 2.0 / p
    if slope_tol is None:
        slope_tol = 0.1 if p == 2.0 else 0.15
    r_grid = np.sort(np.asarray(r_grid, dtype=float))
    c_flat = BoundCheckResult("plateau_flat_in_r")
    c_ctrl = BoundCheckResult("control_flat_in_k")
    c_slope = BoundCheckResult("slope")
    rows, plateaus, predicted = [], {}, {}
    for d in d_list:
        dist = RandomSubsetRademacher(d, k, 1.0)
        spec = SpaceSpec(d, p)
        _, _, trows = _product_table(dist, spec, r_grid, paths, seed, cap, threads, 10 ** 6,
                                     ("scaling", p, "random", d, k))
        for t in trows:
            t.update(family="random_subset", d=d, k=k, p=p)
        rows += trows
        plateaus[d] = _plateau(trows)
        predicted[d] = predicted_ratio(dist, p)
        q, se = _flatness(trows)
        c_flat.add(f"random_subset d={d}", q, budget, se)
        if not all(t["reliable"] for t in trows):
            c_flat.notes.append(f"d={d}: some r censored beyond 1%")
    control_rows, control_plateaus = [], {}
    for kc in control_k:
        dist = FixedSubsetRademacher(kc, tuple(range(kc)), 1.0)
        spec = SpaceSpec(kc, p)
        _, _, trows = _product_table(dist, spec, r_grid, paths, seed, cap, threads, 10 ** 6,
                                     ("scaling", p, "fixed", kc))
        for t in trows:
            t.update(family="fixed_subset", d=kc, k=kc, p=p)
        control_rows += trows
        control_plateaus[kc] = _plateau(trows)
        q, se = _flatness(trows)
        c_flat.add(f"fixed_subset k={kc}", q, budget, se)
    if len(control_plateaus) > 1:
        hi = max(control_plateaus.values())
        lo = min(control_plateaus.values())
        q, se = _ratio_se(hi[0], hi[1], lo[0], lo[1])
        c_ctrl.add("fixed_subset plateaus", q, budget, se)
    xs = [d / k for d in d_list]
    fit = loglog_slope(xs, [plateaus[d][0] for d in d_list], [plateaus[d][1] for d in d_list])
    c_slope.add(f"p={p:g} k={k}", abs(fit["slope"] - expected), slope_tol)
    c_slope.constants = {"slope": fit["slope"], "stderr": fit["stderr"], "expected": expected}
    checks = [c_flat, c_slope] + ([c_ctrl] if c_ctrl.points else [])
    rep = ScalingReport(p, k, d_list, rows, plateaus, fit["slope"], fit["stderr"], expected,
                        slope_tol, control_rows, control_plateaus, predicted, checks, budget,
                        fit["intercept"])
    return rep


# -- Gaussian-associate bounds -------------------------------------------------

def truncated_coord_second(dist, radius, spec, n_mc, seed):
    """E Xhat_j^2 for truncation at ``radius`` (closed form, else Monte Carlo)."""
    v = dist.truncated_coordinate_second_moments(radius, spec.p)
    if v is not None:
        return np.asarray(v, dtype=float), 0.0
    acc = MomentAccumulator(spec.d)
    for x in iter_blocks(dist, seed, n_mc):
        acc.update(truncate_step(x, radius / 3.0, spec) ** 2)
    return acc.mean, float(np.max(acc.se))


def run_gaussian_bounds(dist: StepDistribution, spec: SpaceSpec, r_grid, paths: int, seed: int,
                        budget: float = 4.0, cap: CapPolicy = CapPolicy(),
                        threads: int | None = None, n_mc: int = 10 ** 6,
                        z: float = Z) -> SuiteResult:
    """E T_r against r^2 over the Gaussian associates of X-hat and X.

    U(r) = E T_r * S(Xhat_r) / r^2 should stay bounded above and
    L(r) = E T_r * S(X) / r^2 bounded below, where S(Y) is E||G(Y)||^2 at
    p = 2 and the surrogate (sum_j (E Y_j^2)^(p/2))^(2/p) otherwise.  The
    finite-grid reading: max U / plateau(U) <= budget and
    plateau(L) / min L <= budget.
    """
    if not dist.symmetric:
        raise ValueError("Gaussian bounds need a symmetric step law")
    if spec.p < 2:
        raise ValueError("Gaussian bounds need p >= 2")
    name = _label(dist)
    res = SuiteResult("gaussian")
    r_grid = np.sort(np.asarray(r_grid, dtype=float))
    ga = gaussian_associate(dist, spec, mc_samples=n_mc, seed=derive_seed(seed, "gauss", "v"))
    s_full = ga.second_moment if spec.p == 2.0 else ga.second_moment_surrogate
    fs = functionals_grid(dist, r_grid, spec, n_mc, derive_seed(seed, "gauss", "h"))
    rows, glt = [], []
    for j, (r, f) in enumerate(zip(r_grid, fs)):
        est = _estimate(dist, r, spec, f, paths, derive_seed(seed, "gauss", j), cap, threads)
        v_hat, v_se = truncated_coord_second(dist, 3 * r, spec, n_mc, derive_seed(seed, "gauss", j, "hat"))
        gh = gaussian_associate(dist, spec, coord_second=v_hat)
        s_hat = float(np.sum(v_hat)) if spec.p == 2.0 else gh.second_moment_surrogate
        U = est.mean_T * s_hat / r ** 2
        L = est.mean_T * s_full / r ** 2
        rel = est.se_T / est.mean_T
        rows.append({"dist": name, "r": r, "mean_T": est.mean_T, "ci_T": est.ci_halfwidth,
                     "S_hat": s_hat, "S": s_full, "U": U, "L": L, "se_U": U * rel,
                     "se_L": L * rel, "h": f.h, "product": f.h * est.mean_T,
                     "censored": est.censored, "reliable": int(est.reliable)})
        glt.append((r, gh.lp_moment, v_se))
    good = [t for t in rows if t["reliable"]] or rows
    top = _top_half(good)
    c_up = BoundCheckResult("upper_gaussian_bound", z=z)
    c_lo = BoundCheckResult("lower_gaussian_bound", z=z)
    c_glt = BoundCheckResult("truncated_gaussian_monotone", z=z)
    pu = float(np.median([t["U"] for t in top]))
    pu_se = 1.2533 * math.sqrt(np.mean([t["se_U"] ** 2 for t in top]) / len(top))
    umax = max(good, key=lambda t: t["U"])
    q, se = _ratio_se(umax["U"], umax["se_U"], pu, pu_se)
    c_up.add(f"{name} max U / plateau", q, budget, se)
    pl = float(np.median([t["L"] for t in top]))
    pl_se = 1.2533 * math.sqrt(np.mean([t["se_L"] ** 2 for t in top]) / len(top))
    lmin = min(good, key=lambda t: t["L"])
    q, se = _ratio_se(pl, pl_se, lmin["L"], lmin["se_L"])
    c_lo.add(f"{name} plateau L / min L", q, budget, se)
    for (r0, a, sa), (r1, b, sb) in zip(glt, glt[1:]):
        c_glt.add(f"{name} r={r1:g}", a, b, math.hypot(sa, sb))
    for r0, a, sa in glt:
        c_glt.add(f"{name} r={r0:g} <= full", a, ga.lp_moment, sa)
    res.checks = [c_up, c_lo, c_glt]
    res.tables["gaussian"] = rows
    res.constants = {f"p={spec.p:g}": {"sup_U": umax["U"], "inf_L": lmin["L"],
                                       "plateau_U": pu, "plateau_L": pl,
                                       "E_G_p_full": ga.lp_moment, "m_p": ga.m_p}}
    res.plots["gaussian"] = PlotData("Gaussian-associate ratios against r", ["r", "U", "L"],
                                     [(name, [[t["r"], t["U"], t["L"]] for t in rows])])
    return res


# -- type witness -----------------------------------------------------------------

def gaussian_sum_second_moment(vectors, spec: SpaceSpec, samples: int, seed: int,
                               block: int = 1 << 16) -> tuple[float, float]:
    """Monte Carlo E||sum_j g_j x_j||^2 with independent numpy normals."""
    V = np.atleast_2d(np.asarray(vectors, dtype=float))
    gen = np.random.Generator(np.random.PCG64(seed))
    acc = MomentAccumulator()
    done = 0
    while done < samples:
        m = min(block, samples - done)
        g = gen.standard_normal((m, V.shape[0]))
        acc.update(np.atleast_1d(lp_norm(g @ V, spec)) ** 2)
        done += m
    return acc.mean, acc.se


def run_type_witness_convergence(vectors, p: float, n_grid, paths: int, seed: int,
                                 gauss_samples: int = 10 ** 6, tol: float = 0.1,
                                 moment_samples: int = 10 ** 6, threads: int | None = None,
                                 z: float = Z) -> SuiteResult:
    """E||S_n||^2 / n for the witness law against E||sum g_j x_j||^2."""
    dist = TypeWitness(tuple(map(tuple, vectors)))
    spec = _space(dist, p)
    name = _label(dist)
    res = SuiteResult("witness")
    V = np.array(dist.vectors)
    # exact: atoms +-sqrt(N) x_j with mass 1/(2N) each
    direct = math.fsum(float(lp_norm(x, spec)) ** 2 for x in V)
    at, pr = dist.atoms()
    via_atoms = math.fsum(pr * np.atleast_1d(lp_norm(at, spec)) ** 2)
    c_x = BoundCheckResult("witness_moment_identity", z=z)
    c_x.add("analytic vs sum ||x_j||^2", abs(dist.expected_norm_sq(p) - direct), 0.0)
    c_x.add("atoms vs sum ||x_j||^2", abs(via_atoms - direct), 0.0)
    m = mc_moments(dist, spec, moment_samples, derive_seed(seed, "witness", "mc"))
    c_x.add("mc vs sum ||x_j||^2", abs(m.norm_sq - direct), 0.0, m.se["norm_sq"])
    limit, limit_se = gaussian_sum_second_moment(V, spec, gauss_samples,
                                                 derive_seed(seed, "witness", "gauss"))
    if p == 2.0:
        exact_limit = direct
    else:
        exact_limit = None
    stats = sn_statistics(dist, spec, n_grid, paths, derive_seed(seed, "witness", "Sn"), threads)
    rows = [{"n": s.n, "ratio": s.mean_norm_sq / s.n, "se": s.se_norm_sq / s.n,
             "limit_mc": limit, "limit_se": limit_se,
             "gap": s.mean_norm_sq / s.n - limit} for s in stats]
    c_gx = BoundCheckResult("witness_convergence", z=z)
    last = rows[-1]
    c_gx.add(f"n={last['n']}", abs(last["gap"]), tol)
    c_gx.constants = {"limit_mc": limit, "limit_se": limit_se, "limit_exact_p2": exact_limit,
                      "final_ratio": last["ratio"]}
    res.checks = [c_x, c_gx]
    res.tables["witness"] = rows
    res.constants = {"sum_norm_sq": direct, "N": dist.N, "limit_mc": limit}
    res.plots["witness"] = PlotData("E||S_n||^2 / n against n", ["n", "ratio", "se", "limit"],
                                    [(name, [[t["n"], t["ratio"], t["se"], limit] for t in rows])])
    return res


# -- constant-tracking implications --------------------------------------------

def run_lemma_implication_checks(dist: StepDistribution, spec: SpaceSpec, r_grid, n_grid,
                                 paths: int, seed: int, cap: CapPolicy = CapPolicy(),
                                 threads: int | None = None, n_mc: int = 10 ** 6,
                                 z: float = Z) -> SuiteResult:
    """Feed empirically observed constants through the equivalences between the
    expectation and tail forms of the exit-time estimates.

    * ET >= c/h   implies P(T <= n) <= (8/c) n h
    * P(T <= n) <= C n h   implies ET >= 1/(4C h)
    * ET <= c/h   implies P(T > n) <= c/(n h)         (Markov)
    * P(T > n) <= C/(n h)  implies ET <= 6(1 + 6C^2)/h
    The summation chain behind the last step is also replayed numerically.
    """
    name = _label(dist)
    res = SuiteResult("lemmas")
    if dist.degenerate:
        res.notes.append(f"{name}: degenerate step law excluded")
        return res
    r_grid = np.sort(np.asarray(r_grid, dtype=float))
    data = []
    for j, r in enumerate(r_grid):
        f = functionals_analytic_or_mc(dist, r, spec, n_mc, derive_seed(seed, "lemmas", j, "h"))
        f2 = functionals_analytic_or_mc(dist, 2 * r, spec, n_mc, derive_seed(seed, "lemmas", j, "h2"))
        grid = None
        if n_grid is not None and len(n_grid):
            grid = sorted(int(n) for n in n_grid)
        est = _estimate(dist, r, spec, f, paths, derive_seed(seed, "lemmas", j), cap, threads)
        if grid is not None:
            grid = [n for n in grid if n <= est.cap]
            est.tail = [est.tail_row(n) for n in grid]
        if not est.reliable:
            res.notes.append(f"{name} r={r:g}: censored beyond 1%, excluded")
            continue
        data.append((f, f2, est))
    if not data:
        res.notes.append("no usable estimates")
        return res
    prods = [(f.h * e.mean_T, f, e) for f, _, e in data]
    c_low = min(p for p, _, _ in prods)
    c_up = max(p for p, _, _ in prods)
    C_le = max(((1 - t.p_gt) / (t.n * f.h) for f, _, e in data for t in e.tail), default=0.0)
    C_gt = max((t.n * f.h * t.p_gt for f, _, e in data for t in e.tail), default=0.0)

    l22a = BoundCheckResult("expectation_lower_implies_tail", z=z,
                            constants={"c_observed": c_low, "C_derived": 8 / c_low})
    l22b = BoundCheckResult("tail_implies_expectation_lower", z=z,
                            constants={"C_observed": C_le, "c_derived": 1 / (4 * C_le) if C_le else None})
    l23a = BoundCheckResult("expectation_upper_implies_tail", z=z,
                            constants={"c_observed": c_up, "C_derived": c_up})
    l23b = BoundCheckResult("tail_implies_expectation_upper", z=z,
                            constants={"C_observed": C_gt, "c_derived": 6 * (1 + 6 * C_gt ** 2)})
    chain = BoundCheckResult("summation_chain", z=z)
    rows = []
    for f, f2, e in data:
        h = f.h
        rel_T = e.se_T / e.mean_T
        for t in e.tail:
            se = binomial_se(t.p_gt, e.paths)
            l22a.add(f"r={f.r:g} n={t.n}", 1 - t.p_gt, 8 / c_low * t.n * h, se)
            l23a.add(f"r={f.r:g} n={t.n}", t.p_gt, c_up / (t.n * h), se)
            if t.n >= 3:
                chain.add(f"tail r={f.r:g} n={t.n}", t.p_gt, 72 * C_gt ** 2 / (t.n ** 2 * h ** 2), se)
            rows.append({"r": f.r, "n": t.n, "h": h, "p_gt": t.p_gt, "p_le": 1 - t.p_gt,
                         "mean_T": e.mean_T})
        if C_le:
            l22b.add(f"r={f.r:g}", 1 / (4 * C_le), h * e.mean_T, h * e.mean_T * rel_T)
        c_der = 6 * (1 + 6 * C_gt ** 2)
        l23b.add(f"r={f.r:g}", e.mean_T, c_der / h, e.se_T)
        # regularity step h(2r) >= h(r)/8 and the two summation bounds
        chain.add(f"h(2r) >= h(r)/8 r={f.r:g}", h / 8, f2.h, math.hypot(f.se_h / 8, f2.se_h))
        s1 = 2 / h + 2 + 36 * C_gt ** 2 / h
        chain.add(f"sum bound r={f.r:g}", e.mean_T, s1, e.se_T)
        chain.add(f"h <= 2 plug-in r={f.r:g}", s1, c_der / h, 0.0)
    res.checks = [l22a, l22b, l23a, l23b, chain]
    res.tables["lemmas"] = rows
    res.constants = {"inf_hET": c_low, "sup_hET": c_up, "sup_P_le_over_nh": C_le,
                     "sup_n_h_P_gt": C_gt}
    return res
