"""Step distributions for the walks, their closed-form moments, the radial
3r-truncation and the diagonal Gaussian associate.

Every variant can be sampled through the kernels (one counter-based stream per
draw) and exposes whatever it knows in closed form; unknown quantities come
back as ``None``, never as an approximation.
"""
from __future__ import annotations

import functools
import itertools
import math
from dataclasses import dataclass, field
from typing import ClassVar

import numpy as np
from scipy import integrate

from . import kernelspec as ks
from ._backend import kernels
from .rng import RngStream, stream_keys
from .space import DimensionError, SpaceSpec, lp_norm

MAX_ATOMS = 1 << 16
PROB_TOL = 1e-12


class DistributionError(ValueError):
    """Invalid distribution parameters or spec."""


class MomentsUnavailable(LookupError):
    """A closed form was requested that the variant does not provide."""


def _floats(values, n=None, name="values") -> tuple:
    arr = np.atleast_1d(np.asarray(values, dtype=float))
    if n is not None and arr.size == 1 and n != 1:
        arr = np.full(n, float(arr[0]))
    if n is not None and arr.size != n:
        raise DistributionError(f"{name}: expected {n} entries, got {arr.size}")
    if not np.all(np.isfinite(arr)):
        raise DistributionError(f"{name}: entries must be finite")
    return tuple(float(v) for v in arr)


def _law_from_points(norms: np.ndarray, probs: np.ndarray):
    order = np.argsort(norms, kind="stable")
    return norms[order], probs[order]


class StepDistribution:
    """Base class: defaults derive everything from an enumerable atom list."""

    variant: ClassVar[str] = ""
    label: ClassVar[str] = ""
    symmetric: ClassVar[bool] = True

    @property
    def d(self) -> int:
        raise NotImplementedError

    @property
    def degenerate(self) -> bool:
        return False

    def kernel_spec(self) -> ks.KernelSpec:
        raise NotImplementedError

    def atoms(self, limit: int = MAX_ATOMS):
        """``(points, probs)`` of a finite law, or None."""
        return None

    def norm_law(self, p: float):
        """Law of ||X||_p as sorted ``(values, probs)``, or None."""
        at = self.atoms()
        if at is None:
            return None
        pts, pr = at
        return _law_from_points(np.atleast_1d(lp_norm(pts, SpaceSpec(self.d, p))), pr)

    def mean(self):
        if self.symmetric:
            return np.zeros(self.d)
        at = self.atoms()
        return None if at is None else at[1] @ at[0]

    def second_moment_matrix(self):
        """E[X X^T], or None."""
        at = self.atoms()
        if at is None:
            return None
        pts, pr = at
        return (pts * pr[:, None]).T @ pts

    def coordinate_second_moments(self):
        m = self.second_moment_matrix()
        return None if m is None else np.diag(m).copy()

    def expected_norm_sq(self, p: float):
        law = self.norm_law(p)
        return None if law is None else float(law[1] @ law[0] ** 2)

    def expected_norm_p(self, p: float):
        law = self.norm_law(p)
        return None if law is None else float(law[1] @ law[0] ** p)

    def truncated_coordinate_second_moments(self, radius: float, p: float):
        """E[Xhat_j^2] for the truncation at ``radius``, or None."""
        at = self.atoms()
        if at is None:
            return None
        pts, pr = at
        return pr @ truncate_step(pts, radius / 3.0, SpaceSpec(self.d, p)) ** 2

    def params(self) -> dict:
        raise NotImplementedError

    def to_dict(self) -> dict:
        return {"variant": self.variant, **self.params()}


@dataclass(frozen=True)
class FixedSubsetRademacher(StepDistribution):
    """X_j = alpha_j * eps_j on a fixed coordinate subset, independent signs."""

    dim: int
    subset: tuple
    alpha: tuple = (1.0,)

    variant: ClassVar[str] = "fixed_subset_rademacher"
    label: ClassVar[str] = "fixed-subset Rademacher"

    def __post_init__(self):
        if self.dim < 1:
            raise DistributionError("d must be >= 1")
        sub = tuple(int(j) for j in np.atleast_1d(self.subset))
        if not sub:
            raise DistributionError("subset must be non-empty")
        if len(set(sub)) != len(sub) or min(sub) < 0 or max(sub) >= self.dim:
            raise DistributionError(f"subset must hold distinct indices in [0, {self.dim})")
        alpha = _floats(self.alpha, len(sub), "alpha")
        if min(alpha) < 0:
            raise DistributionError("alpha must be nonnegative")
        object.__setattr__(self, "subset", sub)
        object.__setattr__(self, "alpha", alpha)

    @property
    def d(self):
        return self.dim

    @property
    def degenerate(self):
        return max(self.alpha) == 0.0

    def norm_value(self, p):
        return lp_norm(np.array(self.alpha), SpaceSpec(len(self.alpha), p))

    def kernel_spec(self):
        return ks.KernelSpec(ks.FIXED, self.dim, np.array(self.alpha), idx=np.array(self.subset))

    def atoms(self, limit=MAX_ATOMS):
        m = len(self.subset)
        if 2 ** m > limit:
            return None
        signs = np.array(list(itertools.product((1.0, -1.0), repeat=m)))
        pts = np.zeros((2 ** m, self.dim))
        pts[:, list(self.subset)] = signs * np.array(self.alpha)
        return pts, np.full(2 ** m, 2.0 ** -m)

    def norm_law(self, p):
        return np.array([self.norm_value(p)]), np.array([1.0])

    def second_moment_matrix(self):
        return np.diag(self.coordinate_second_moments())

    def coordinate_second_moments(self):
        v = np.zeros(self.dim)
        v[list(self.subset)] = np.array(self.alpha) ** 2
        return v

    def expected_norm_p(self, p):
        return float(np.sum(np.array(self.alpha) ** p))

    def truncated_coordinate_second_moments(self, radius, p):
        nu = self.norm_value(p)
        f = 1.0 if nu <= radius else (radius / nu) ** 2
        return self.coordinate_second_moments() * f

    def params(self):
        return {"d": self.dim, "subset": list(self.subset), "alpha": list(self.alpha)}


@dataclass(frozen=True)
class RandomSubsetRademacher(StepDistribution):
    """Theta uniform on k-subsets of {0..d-1}; X_j = alpha_j * eps_j * 1{j in Theta}."""

    dim: int
    k: int
    alpha: tuple = (1.0,)

    variant: ClassVar[str] = "random_subset_rademacher"
    label: ClassVar[str] = "random k-subset Rademacher"

    def __post_init__(self):
        if self.dim < 1 or not 1 <= self.k <= self.dim:
            raise DistributionError(f"need 1 <= k <= d, got k={self.k}, d={self.dim}")
        alpha = _floats(self.alpha, self.dim, "alpha")
        if min(alpha) < 0:
            raise DistributionError("alpha must be nonnegative")
        object.__setattr__(self, "alpha", alpha)

    @property
    def d(self):
        return self.dim

    @property
    def degenerate(self):
        return max(self.alpha) == 0.0

    @property
    def constant_alpha(self) -> bool:
        return len(set(self.alpha)) == 1

    def kernel_spec(self):
        return ks.KernelSpec(ks.RANDOM, self.dim, np.array(self.alpha), mode=self.k)

    def _subsets(self, limit):
        if math.comb(self.dim, self.k) > limit:
            return None
        return list(itertools.combinations(range(self.dim), self.k))

    def atoms(self, limit=MAX_ATOMS):
        if math.comb(self.dim, self.k) * 2 ** self.k > limit:
            return None
        subsets = self._subsets(limit)
        signs = np.array(list(itertools.product((1.0, -1.0), repeat=self.k)))
        alpha = np.array(self.alpha)
        pts = np.zeros((len(subsets) * len(signs), self.dim))
        row = 0
        for sub in subsets:
            cols = list(sub)
            pts[row:row + len(signs), cols] = signs * alpha[cols]
            row += len(signs)
        return pts, np.full(len(pts), 1.0 / len(pts))

    def _subset_norms(self, p):
        subsets = self._subsets(MAX_ATOMS)
        if subsets is None:
            return None, None
        alpha = np.array(self.alpha)
        vals = np.array([lp_norm(alpha[list(s)], SpaceSpec(self.k, p)) for s in subsets])
        return subsets, vals

    def norm_law(self, p):
        if self.constant_alpha:
            nu = lp_norm(np.full(self.k, self.alpha[0]), SpaceSpec(self.k, p))
            return np.array([nu]), np.array([1.0])
        subsets, vals = self._subset_norms(p)
        if subsets is None:
            return None
        return _law_from_points(vals, np.full(len(vals), 1.0 / len(vals)))

    def second_moment_matrix(self):
        return np.diag(self.coordinate_second_moments())

    def coordinate_second_moments(self):
        return np.array(self.alpha) ** 2 * (self.k / self.dim)

    def expected_norm_p(self, p):
        return float(np.sum(np.array(self.alpha) ** p) * self.k / self.dim)

    def truncated_coordinate_second_moments(self, radius, p):
        if self.constant_alpha:
            nu = self.norm_law(p)[0][0]
            f = 1.0 if nu <= radius else (radius / nu) ** 2
            return self.coordinate_second_moments() * f
        subsets, vals = self._subset_norms(p)
        if subsets is None:
            return None
        alpha2 = np.array(self.alpha) ** 2
        out = np.zeros(self.dim)
        for sub, nu in zip(subsets, vals):
            f = 1.0 if nu <= radius else (radius / nu) ** 2
            out[list(sub)] += alpha2[list(sub)] * f
        return out / len(subsets)

    def params(self):
        return {"d": self.dim, "k": self.k, "alpha": list(self.alpha)}


@dataclass(frozen=True)
class GaussianSteps(StepDistribution):
    """Independent centered normal coordinates with standard deviations sigma."""

    sigma: tuple

    variant: ClassVar[str] = "gaussian"
    label: ClassVar[str] = "independent Gaussian coordinates"

    def __post_init__(self):
        sigma = _floats(self.sigma, name="sigma")
        if min(sigma) < 0:
            raise DistributionError("sigma must be nonnegative")
        object.__setattr__(self, "sigma", sigma)

    @property
    def d(self):
        return len(self.sigma)

    @property
    def degenerate(self):
        return max(self.sigma) == 0.0

    @property
    def scalar_sigma(self):
        """The single nonzero sigma when only one coordinate moves, else None."""
        nz = [s for s in self.sigma if s > 0]
        return nz[0] if len(nz) == 1 else None

    def kernel_spec(self):
        return ks.KernelSpec(ks.GAUSS, self.d, np.array(self.sigma))

    def norm_law(self, p):
        return None

    def second_moment_matrix(self):
        return np.diag(self.coordinate_second_moments())

    def coordinate_second_moments(self):
        return np.array(self.sigma) ** 2

    def expected_norm_sq(self, p):
        if p == 2.0:
            return float(np.sum(np.array(self.sigma) ** 2))
        s = self.scalar_sigma
        return None if s is None else s * s

    def expected_norm_p(self, p):
        return gaussian_abs_moment(p) * float(np.sum(np.array(self.sigma) ** p))

    def truncated_coordinate_second_moments(self, radius, p):
        return None

    def params(self):
        return {"sigma": list(self.sigma)}


@dataclass(frozen=True)
class DiscreteRadial(StepDistribution):
    """||X|| = radii[i] with probability probs[i], along a signed coordinate axis.

    ``direction="axis"`` uses +-e_0; ``"random_axis"`` a uniform signed axis.
    """

    dim: int
    radii: tuple
    probs: tuple
    direction: str = "random_axis"

    variant: ClassVar[str] = "discrete_radial"
    label: ClassVar[str] = "discrete radial law on signed axes"

    def __post_init__(self):
        if self.dim < 1:
            raise DistributionError("d must be >= 1")
        radii = _floats(self.radii, name="radii")
        probs = _floats(self.probs, len(radii), "probs")
        if min(radii) <= 0:
            raise DistributionError("radii must be positive")
        if min(probs) < 0 or abs(sum(probs) - 1.0) > PROB_TOL:
            raise DistributionError("probs must be nonnegative and sum to 1")
        if self.direction not in ("axis", "random_axis"):
            raise DistributionError("direction must be 'axis' or 'random_axis'")
        object.__setattr__(self, "radii", radii)
        object.__setattr__(self, "probs", probs)

    @property
    def d(self):
        return self.dim

    def kernel_spec(self):
        cdf = np.cumsum(self.probs)
        cdf[-1] = 1.0
        return ks.KernelSpec(ks.RADIAL, self.dim, np.array(self.radii), b=cdf,
                             mode=0 if self.direction == "axis" else 1)

    def _axes(self):
        return [0] if self.direction == "axis" else list(range(self.dim))

    def atoms(self, limit=MAX_ATOMS):
        axes = self._axes()
        if 2 * len(axes) * len(self.radii) > limit:
            return None
        pts, pr = [], []
        for rho, q in zip(self.radii, self.probs):
            for j in axes:
                for s in (1.0, -1.0):
                    x = np.zeros(self.dim)
                    x[j] = s * rho
                    pts.append(x)
                    pr.append(q / (2 * len(axes)))
        return np.array(pts), np.array(pr)

    def norm_law(self, p):
        return _law_from_points(np.array(self.radii), np.array(self.probs))

    def _spread(self, total):
        v = np.zeros(self.dim)
        axes = self._axes()
        v[axes] = total / len(axes)
        return v

    def second_moment_matrix(self):
        return np.diag(self.coordinate_second_moments())

    def coordinate_second_moments(self):
        return self._spread(float(np.dot(self.probs, np.array(self.radii) ** 2)))

    def truncated_coordinate_second_moments(self, radius, p):
        rho = np.minimum(np.array(self.radii), radius)
        return self._spread(float(np.dot(self.probs, rho ** 2)))

    def params(self):
        return {"d": self.dim, "radii": list(self.radii), "probs": list(self.probs),
                "direction": self.direction}


@dataclass(frozen=True)
class Shifted(StepDistribution):
    """``base + drift``: a non-centered law with nonzero truncated mean."""

    base: StepDistribution
    drift: tuple

    variant: ClassVar[str] = "shifted"
    label: ClassVar[str] = "shifted"
    symmetric: ClassVar[bool] = False

    def __post_init__(self):
        drift = _floats(self.drift, self.base.d, "drift")
        if isinstance(self.base, Shifted):
            drift = tuple(np.add(self.base.drift, drift))
            object.__setattr__(self, "base", self.base.base)
        object.__setattr__(self, "drift", drift)

    @property
    def d(self):
        return self.base.d

    @property
    def degenerate(self):
        return self.base.degenerate

    def kernel_spec(self):
        return self.base.kernel_spec().with_shift(np.array(self.drift))

    def atoms(self, limit=MAX_ATOMS):
        at = self.base.atoms(limit)
        if at is None:
            return None
        return at[0] + np.array(self.drift), at[1]

    def mean(self):
        m = self.base.mean()
        return None if m is None else m + np.array(self.drift)

    def second_moment_matrix(self):
        mb, eb = self.base.second_moment_matrix(), self.base.mean()
        if mb is None or eb is None:
            return None
        mu = np.array(self.drift)
        return mb + np.outer(mu, eb) + np.outer(eb, mu) + np.outer(mu, mu)

    def params(self):
        return {"base": self.base.to_dict(), "drift": list(self.drift)}


@dataclass(frozen=True)
class PointMass(StepDistribution):
    """Deterministic step x.  Degenerate: diagnostics only."""

    x: tuple

    variant: ClassVar[str] = "point_mass"
    label: ClassVar[str] = "point mass (degenerate)"
    symmetric: ClassVar[bool] = False

    def __post_init__(self):
        object.__setattr__(self, "x", _floats(self.x, name="x"))

    @property
    def d(self):
        return len(self.x)

    @property
    def degenerate(self):
        return True

    def kernel_spec(self):
        return ks.KernelSpec(ks.POINT, self.d, np.array(self.x))

    def atoms(self, limit=MAX_ATOMS):
        return np.array([self.x]), np.array([1.0])

    def mean(self):
        return np.array(self.x)

    def params(self):
        return {"x": list(self.x)}


@dataclass(frozen=True)
class TypeWitness(StepDistribution):
    """X = eps * sqrt(N) * x_J with J uniform on the N given vectors."""

    vectors: tuple

    variant: ClassVar[str] = "type_witness"
    label: ClassVar[str] = "type witness"

    def __post_init__(self):
        arr = np.atleast_2d(np.asarray(self.vectors, dtype=float))
        if arr.size == 0 or not np.all(np.isfinite(arr)):
            raise DistributionError("vectors must be a non-empty finite N x d array")
        object.__setattr__(self, "vectors", tuple(tuple(float(v) for v in row) for row in arr))

    @property
    def N(self) -> int:
        return len(self.vectors)

    @property
    def d(self):
        return len(self.vectors[0])

    @property
    def degenerate(self):
        return not np.any(np.array(self.vectors))

    def kernel_spec(self):
        a = math.sqrt(self.N) * np.array(self.vectors)
        return ks.KernelSpec(ks.WITNESS, self.d, a.ravel(), mode=self.N)

    def atoms(self, limit=MAX_ATOMS):
        if 2 * self.N > limit:
            return None
        x = math.sqrt(self.N) * np.array(self.vectors)
        return np.vstack([x, -x]), np.full(2 * self.N, 1.0 / (2 * self.N))

    def second_moment_matrix(self):
        x = np.array(self.vectors)
        return x.T @ x

    def expected_norm_sq(self, p):
        norms = np.atleast_1d(lp_norm(np.array(self.vectors), SpaceSpec(self.d, p)))
        return float(np.sum(norms ** 2))

    def params(self):
        return {"vectors": [list(v) for v in self.vectors]}


VARIANTS = {cls.variant: cls for cls in (FixedSubsetRademacher, RandomSubsetRademacher,
                                         GaussianSteps, DiscreteRadial, Shifted, PointMass,
                                         TypeWitness)}


def distribution_from_dict(spec: dict, path: str = "distribution") -> StepDistribution:
    """Build a distribution from its config mapping (inverse of ``to_dict``)."""
    if not isinstance(spec, dict) or "variant" not in spec:
        raise DistributionError(f"{path}: expected a mapping with a 'variant' key")
    variant = spec["variant"]
    if variant not in VARIANTS:
        raise DistributionError(f"{path}.variant: unknown variant {variant!r}; "
                                f"expected one of {sorted(VARIANTS)}")
    allowed = {
        "fixed_subset_rademacher": {"d", "subset", "alpha"},
        "random_subset_rademacher": {"d", "k", "alpha"},
        "gaussian": {"sigma", "d"},
        "discrete_radial": {"d", "radii", "probs", "direction"},
        "shifted": {"base", "drift"},
        "point_mass": {"x"},
        "type_witness": {"vectors"},
    }[variant]
    extra = set(spec) - allowed - {"variant"}
    if extra:
        raise DistributionError(f"{path}: unknown key(s) {sorted(extra)} for variant {variant!r}")
    try:
        if variant == "fixed_subset_rademacher":
            return FixedSubsetRademacher(int(spec["d"]), tuple(spec["subset"]),
                                         spec.get("alpha", 1.0))
        if variant == "random_subset_rademacher":
            return RandomSubsetRademacher(int(spec["d"]), int(spec["k"]), spec.get("alpha", 1.0))
        if variant == "gaussian":
            sigma = np.atleast_1d(np.asarray(spec.get("sigma", 1.0), dtype=float))
            if "d" in spec:
                if sigma.size == 1:
                    sigma = np.full(int(spec["d"]), sigma[0])
                elif sigma.size != int(spec["d"]):
                    raise DistributionError(f"{path}.sigma: expected {spec['d']} entries")
            return GaussianSteps(tuple(sigma))
        if variant == "discrete_radial":
            return DiscreteRadial(int(spec["d"]), tuple(spec["radii"]), tuple(spec["probs"]),
                                  spec.get("direction", "random_axis"))
        if variant == "shifted":
            base = distribution_from_dict(spec["base"], f"{path}.base")
            return Shifted(base, tuple(np.atleast_1d(spec["drift"])))
        if variant == "point_mass":
            return PointMass(tuple(spec["x"]))
        return TypeWitness(tuple(map(tuple, spec["vectors"])))
    except KeyError as exc:
        raise DistributionError(f"{path}.{exc.args[0]}: required key missing") from None
    except DistributionError as exc:
        if str(exc).startswith(path):
            raise
        raise DistributionError(f"{path}: {exc}") from None


def describe(dist: StepDistribution, p: float = 2.0) -> str:
    law = dist.norm_law(p)
    lines = [f"{dist.label} ({dist.variant}), d={dist.d}",
             f"  analytic: {'yes' if law is not None else 'no'}"
             f"{' (degenerate: excluded from claims)' if dist.degenerate else ''}",
             f"  symmetric: {'yes' if dist.symmetric else 'no'}"]
    for key, val in dist.params().items():
        if key == "vectors":
            lines.append(f"  N = {len(val)}")
        elif key != "base":
            if isinstance(val, list) and len(val) > 8 and len(set(map(repr, val))) == 1:
                val = f"{val[0]} (all {len(val)} entries)"
            lines.append(f"  {key} = {val}")
    if isinstance(dist, Shifted):
        lines.append("  base: " + describe(dist.base, p).replace("\n", "\n  "))
    if isinstance(dist, TypeWitness):
        lines.append(f"  sum ||x_j||^2 (p={p:g}) = {dist.expected_norm_sq(p):.12g}")
    e2 = dist.expected_norm_sq(p)
    lines.append(f"  E||X||^2 (p={p:g}) = " + (f"{e2:.12g}" if e2 is not None else "unavailable"))
    return "\n".join(lines)


# -- sampling ----------------------------------------------------------------

def sample(dist: StepDistribution, rng: RngStream) -> np.ndarray:
    """One draw from ``rng``; advances the stream by the law's word budget."""
    spec = dist.kernel_spec()
    keys = np.array([rng.key], dtype=np.uint64)
    x = kernels.sample_steps(*spec.args(), keys, rng.counter)[0]
    rng.advance(spec.words_per_step)
    return x


def sample_block(dist: StepDistribution, seed: int, start: int, count: int) -> np.ndarray:
    """Draws ``start .. start + count - 1``: draw i is word 0 of stream (seed, i)."""
    spec = dist.kernel_spec()
    return kernels.sample_steps(*spec.args(), stream_keys(seed, start, count), 0)


def iter_blocks(dist: StepDistribution, seed: int, n: int, block: int = 1 << 16):
    for start in range(0, n, block):
        yield sample_block(dist, seed, start, min(block, n - start))


def truncate_step(x, r: float, spec: SpaceSpec) -> np.ndarray:
    """Radial projection onto the ball of radius 3r (rows of a 2-d array too)."""
    if r <= 0:
        raise ValueError("r must be positive")
    x = np.asarray(x, dtype=float)
    if x.shape[-1] != spec.d:
        raise DimensionError(f"expected last axis of length {spec.d}, got {x.shape}")
    nrm = np.asarray(lp_norm(x, spec))
    cap = 3.0 * r
    over = nrm > cap
    scale = np.where(over, cap / np.where(over, nrm, 1.0), 1.0)
    return x * scale[..., None] if x.ndim > 1 else x * float(scale)


# -- moments -----------------------------------------------------------------

@dataclass
class Moments:
    """Closed-form moments; ``None`` marks a quantity with no closed form."""

    norm_sq: float | None
    coord_second: np.ndarray | None
    norm_p: float | None
    mean: np.ndarray | None
    source: str = "analytic"
    samples: int = 0
    se: dict = field(default_factory=dict)

    @property
    def available(self) -> bool:
        return self.norm_sq is not None and self.coord_second is not None


def analytic_moments(dist: StepDistribution, spec: SpaceSpec) -> Moments:
    if dist.d != spec.d:
        raise DimensionError(f"distribution has d={dist.d}, space has d={spec.d}")
    return Moments(dist.expected_norm_sq(spec.p), dist.coordinate_second_moments(),
                   dist.expected_norm_p(spec.p), dist.mean())


def mc_moments(dist: StepDistribution, spec: SpaceSpec, n: int = 10 ** 6, seed: int = 0) -> Moments:
    """Plug-in estimates of the same quantities with standard errors."""
    from .stats import MomentAccumulator

    acc_sq, acc_p = MomentAccumulator(), MomentAccumulator()
    acc_coord = MomentAccumulator(spec.d)
    acc_mean = MomentAccumulator(spec.d)
    for x in iter_blocks(dist, seed, n):
        nrm = np.atleast_1d(lp_norm(x, spec))
        acc_sq.update(nrm ** 2)
        acc_p.update(nrm ** spec.p)
        acc_coord.update(x ** 2)
        acc_mean.update(x)
    return Moments(acc_sq.mean, acc_coord.mean, acc_p.mean, acc_mean.mean, source="mc",
                   samples=n, se={"norm_sq": acc_sq.se, "coord_second": acc_coord.se,
                                  "norm_p": acc_p.se, "mean": acc_mean.se})


@functools.lru_cache(maxsize=None)
def gaussian_abs_moment(p: float) -> float:
    """E|g|^p for standard normal g, checked against quadrature on first use."""
    closed = 2.0 ** (p / 2) * math.gamma((p + 1) / 2) / math.sqrt(math.pi)
    quad, _ = integrate.quad(lambda x: 2.0 * x ** p * math.exp(-x * x / 2) / math.sqrt(2 * math.pi),
                             0, np.inf, epsabs=0, epsrel=1e-13, limit=200)
    if abs(quad - closed) > 1e-10 * closed:
        raise RuntimeError(f"E|g|^{p}: closed form {closed!r} disagrees with quadrature {quad!r}")
    return closed


@dataclass
class GaussianAssociate:
    """Moments of the centered Gaussian sharing X's coordinate second moments."""

    p: float
    coord_second: np.ndarray
    m_p: float
    lp_moment: float            # E||G||_p^p
    second_moment_surrogate: float  # (E||G||_p^p / m_p)^(2/p)
    second_moment: float | None  # E||G||_p^2: exact at p=2, else MC when requested
    second_moment_se: float = 0.0
    mc_samples: int = 0


def gaussian_associate(dist: StepDistribution, spec: SpaceSpec, mc_samples: int | None = None,
                       seed: int = 0, coord_second=None) -> GaussianAssociate:
    """E||G(X)||^p = E|g|^p * sum_j (E X_j^2)^(p/2), plus an E||G(X)||^2 figure.

    For p = 2 the second moment is exact.  Otherwise it is estimated by Monte
    Carlo from the full second-moment matrix when ``mc_samples`` is given, and
    left as None otherwise; the surrogate is always available.
    """
    p = spec.p
    v = coord_second
    if v is None:
        v = dist.coordinate_second_moments()
    if v is None:
        if mc_samples is None:
            raise MomentsUnavailable(f"{dist.variant}: no closed-form coordinate second moments; "
                                     "pass mc_samples to estimate them")
        v = mc_moments(dist, spec, mc_samples, seed).coord_second
    v = np.asarray(v, dtype=float)
    m_p = gaussian_abs_moment(p)
    s = float(np.sum(v ** (p / 2)))
    surrogate = s ** (2.0 / p)
    ga = GaussianAssociate(p, v, m_p, m_p * s, surrogate, float(np.sum(v)) if p == 2.0 else None)
    if p != 2.0 and mc_samples:
        cov = dist.second_moment_matrix() if coord_second is None else None
        if cov is None:
            cov = np.diag(v)
        mean = dist.mean()
        if mean is not None:
            cov = cov - np.outer(mean, mean)
        w, q = np.linalg.eigh(cov)
        root = q * np.sqrt(np.clip(w, 0, None))
        from .stats import MomentAccumulator

        acc = MomentAccumulator()
        std = GaussianSteps(tuple([1.0] * spec.d))
        for z in iter_blocks(std, seed, mc_samples):
            acc.update(np.atleast_1d(lp_norm(z @ root.T, spec)) ** 2)
        ga.second_moment, ga.second_moment_se, ga.mc_samples = acc.mean, acc.se, mc_samples
    return ga
