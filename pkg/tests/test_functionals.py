import math
from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from exitwalk import (DiscreteRadial, FixedSubsetRademacher, GaussianSteps, PointMass,
                      RandomSubsetRademacher, Shifted, SpaceSpec, TypeWitness, check_h_limit,
                      check_hd_bounds, check_q2_identity, functionals_analytic, functionals_mc,
                      geometric_grid, truncated_moment_identity)
from exitwalk.functionals import NoClosedForm, functionals_grid, has_closed_form

from oracles import gaussian_tail, gaussian_truncated_second, q2_sides_exact

RADIAL = DiscreteRadial(3, (0.5, 2.0, 7.0), (0.5, 0.3, 0.2))


def test_strict_inequality_at_atoms():
    # ||X|| == r counts towards K, never G
    f = functionals_analytic(RADIAL, 2.0, SpaceSpec(3))
    assert f.G == pytest.approx(0.2)
    assert f.K == pytest.approx((0.5 * 0.25 + 0.3 * 4.0) / 4.0)
    assert f.h == pytest.approx(f.G + f.K)


def test_scalar_gaussian_against_erf_oracle():
    spec = SpaceSpec(1)
    f = functionals_analytic(GaussianSteps((1.0,)), 1.0, spec)
    assert f.G == pytest.approx(0.31731050786291415, rel=1e-14)
    for sigma, r in [(1.0, 0.3), (2.0, 1.5), (0.5, 3.0)]:
        f = functionals_analytic(GaussianSteps((sigma,)), r, spec)
        assert f.G == pytest.approx(gaussian_tail(r, sigma), rel=1e-12)
        assert f.K == pytest.approx(gaussian_truncated_second(r, sigma) / r ** 2, rel=1e-9)


def test_shifted_truncated_mean():
    dist = Shifted(DiscreteRadial(1, (1.0,), (1.0,), "axis"), (0.5,))
    # atoms 1.5 and -0.5 with mass 1/2 each
    f = functionals_analytic(dist, 1.0, SpaceSpec(1))
    assert f.G == pytest.approx(0.5)
    assert f.M[0] == pytest.approx(-0.25)
    assert f.K == pytest.approx(0.125)
    assert f.h == pytest.approx(0.5 + 0.125 + 0.25)


def test_no_closed_form_for_multivariate_gaussian():
    with pytest.raises(NoClosedForm):
        functionals_analytic(GaussianSteps((1.0, 1.0)), 1.0, SpaceSpec(2))
    assert not has_closed_form(GaussianSteps((1.0, 1.0)), SpaceSpec(2))
    assert has_closed_form(RADIAL, SpaceSpec(3))


@settings(max_examples=60, deadline=None)
@given(vals=st.lists(st.integers(1, 400), min_size=1, max_size=6),
       weights=st.lists(st.integers(1, 50), min_size=6, max_size=6),
       r=st.integers(1, 500))
def test_q2_against_exact_rationals(vals, weights, r):
    radii = [v / 40 for v in vals]
    w = weights[:len(radii)]
    probs = [x / sum(w) for x in w]
    dist = DiscreteRadial(1, tuple(radii), tuple(probs), "axis")
    rr = r / 40
    rep = check_q2_identity(dist, rr, SpaceSpec(1))
    lhs, rhs = q2_sides_exact([Fraction(v, 40) for v in vals],
                              [Fraction(x, sum(w)) for x in w], Fraction(r, 40))
    assert lhs == rhs
    assert rep.lhs == pytest.approx(float(lhs), rel=1e-12, abs=1e-15)
    assert rep.residual < 1e-12


@pytest.mark.parametrize("dist", [RADIAL, FixedSubsetRademacher(4, (0, 1, 2), (1.0, 0.5, 2.0)),
                                  RandomSubsetRademacher(5, 2, (1.0, 2.0, 0.5, 1.5, 1.0)),
                                  GaussianSteps((1.5,)), TypeWitness(((1.0, 0.0), (0.5, 0.5)))])
@pytest.mark.parametrize("p", [2.0, 3.0])
def test_q2_residual_on_grid(dist, p):
    spec = SpaceSpec(dist.d, p)
    for r in geometric_grid(0.25, points=8, ratio=2.0):
        rep = check_q2_identity(dist, r, spec)
        assert rep.passed, (r, rep.residual)


def test_q2_mc_fallback_is_exact_on_empirical_law():
    rep = check_q2_identity(GaussianSteps((1.0, 1.0)), 1.3, SpaceSpec(2), n_mc=20_000, seed=1)
    assert rep.source == "mc" and rep.residual < 1e-12


@settings(max_examples=100, deadline=None)
@given(r=st.floats(0.05, 50.0), s_over_r=st.floats(1.0, 30.0))
def test_hd_bounds_property(r, s_over_r):
    spec = SpaceSpec(3, 2.0)
    f_r = functionals_analytic(RADIAL, r, spec)
    f_s = functionals_analytic(RADIAL, r * s_over_r, spec)
    assert check_hd_bounds(f_r, f_s).passed
    assert f_r.h <= 2 and f_s.h <= 2


def test_hd_rejects_reversed_pair():
    spec = SpaceSpec(3)
    with pytest.raises(ValueError):
        check_hd_bounds(functionals_analytic(RADIAL, 2.0, spec), functionals_analytic(RADIAL, 1.0, spec))


def test_monotonicity_on_grid():
    spec = SpaceSpec(3)
    fs = functionals_grid(RADIAL, geometric_grid(0.1, points=20, ratio=1.5), spec)
    G = [f.G for f in fs]
    q = [f.r ** 2 * (f.G + f.K) for f in fs]
    assert all(b <= a for a, b in zip(G, G[1:]))
    assert all(b >= a - 1e-12 for a, b in zip(q, q[1:]))


def test_h_limit_for_bounded_centered_law():
    rep = check_h_limit(RADIAL, SpaceSpec(3), geometric_grid(1.0, points=8, ratio=1.5))
    assert rep.passed and rep.terminal_ratio == pytest.approx(1.0)
    with pytest.raises(ValueError):
        check_h_limit(Shifted(RADIAL, (0.1, 0, 0)), SpaceSpec(3), [1.0, 2.0])


def test_mc_functionals_agree_with_analytic():
    spec = SpaceSpec(3, 2.0)
    for r in (0.4, 1.0, 3.0):
        exact = functionals_analytic(RADIAL, r, spec)
        mc = functionals_mc(RADIAL, r, spec, n=200_000, seed=3)
        assert abs(mc.G - exact.G) <= 4 * mc.se_G + 1e-12
        assert abs(mc.K - exact.K) <= 4 * mc.se_K + 1e-12
        assert abs(mc.h - exact.h) <= 4 * mc.se_h + 1e-12


def test_point_mass_is_degenerate_but_well_defined():
    f = functionals_analytic(PointMass((1.0, 0.0)), 0.5, SpaceSpec(2))
    assert f.G == 1.0 and f.K == 0.0 and f.h == 1.0


def test_truncated_moment_check():
    spec = SpaceSpec(3)
    rep = truncated_moment_identity(RADIAL, 1.0, spec, n=200_000, seed=4)
    assert rep.passed
    # exact: E||Xhat||^2 for truncation at 3
    exact = 0.5 * 0.25 + 0.3 * 4.0 + 0.2 * 9.0
    assert rep.identity_value == pytest.approx(exact)


def test_geometric_grid():
    g = geometric_grid(1.0, points=5, ratio=2.0)
    np.testing.assert_allclose(g, [1, 2, 4, 8, 16])
    g = geometric_grid(1.0, 16.0, points=5)
    np.testing.assert_allclose(g, [1, 2, 4, 8, 16])
    assert len(geometric_grid(1.0, 2.0, ratio=2 ** 0.25)) == 5
