import math

import numpy as np
import pytest

from exitwalk import (DiscreteRadial, GaussianSteps, PointMass, RandomSubsetRademacher, RngStream,
                      SpaceSpec, TypeWitness, estimate_exit_time, exit_equals_truncated_exit,
                      sample, simulate_exit, sn_statistics)
from exitwalk.simulator import BLOCK, exit_time_array, norm_array, tail_grid
from exitwalk.space import lp_norm

from oracles import lattice_exit_moments

PM = DiscreteRadial(1, (1.0,), (1.0,), "axis")


def test_point_mass_exits_deterministically():
    spec = SpaceSpec(2)
    dist = PointMass((1.0, 0.0))
    # ||S_n|| = n, exit needs n > 3.5 strictly
    assert simulate_exit(dist, 3.5, spec, 100, RngStream(0)).time == 4
    # ||S_3|| == 3 is not an exit
    assert simulate_exit(dist, 3.0, spec, 100, RngStream(0)).time == 4
    est = estimate_exit_time(dist, 3.0, spec, 100, cap=50, seed=1)
    assert est.mean_T == 4 and est.var_T == 0 and est.censored == 0


def test_censoring_at_cap():
    spec = SpaceSpec(2)
    s = simulate_exit(PointMass((1.0, 0.0)), 3.0, spec, 1, RngStream(0))
    assert s.time is None and not s.exited
    est = estimate_exit_time(PointMass((1.0, 0.0)), 3.0, spec, 100, cap=3, seed=1)
    assert est.censored == 100 and est.mean_is_lower_bound and not est.reliable
    with pytest.raises(ValueError):
        est.p_gt(4)


def test_strict_exit_replayed_with_sample():
    dist = RandomSubsetRademacher(4, 2)
    spec = SpaceSpec(4, 3.0)
    for path in range(20):
        t = simulate_exit(dist, 2.5, spec, 10_000, RngStream.for_path(9, path)).time
        rng = RngStream.for_path(9, path)
        s = np.zeros(4)
        norms = []
        for _ in range(t):
            s += sample(dist, rng)
            norms.append(lp_norm(s, spec))
        assert norms[-1] > 2.5
        assert all(n <= 2.5 for n in norms[:-1])


def test_simulate_exit_advances_stream_like_array():
    dist = GaussianSteps((1.0, 1.0))
    spec = SpaceSpec(2)
    times = exit_time_array(dist, 2.0, spec, 5, 10_000, seed=4)
    for i in range(5):
        assert simulate_exit(dist, 2.0, spec, 10_000, RngStream.for_path(4, i)).time == times[i]


@pytest.mark.parametrize("r", [3, 5.5])
def test_lattice_walk_against_markov_chain(r):
    # steps +-1 w.p. 0.3 each, +-2 w.p. 0.2 each
    dist = DiscreteRadial(1, (1.0, 2.0), (0.6, 0.4), "axis")
    m1, m2 = lattice_exit_moments(r, {1: 0.3, -1: 0.3, 2: 0.2, -2: 0.2})
    est = estimate_exit_time(dist, r, SpaceSpec(1), 50_000, cap=10 ** 5, seed=8)
    assert abs(est.mean_T - m1) <= 4 * est.se_T
    assert est.var_T == pytest.approx(m2 - m1 ** 2, rel=0.05)


def test_gamblers_ruin_small():
    est = estimate_exit_time(PM, 10, SpaceSpec(1), 20_000, cap=10 ** 5, seed=5)
    assert abs(est.mean_T - 121) <= 4 * est.se_T


@pytest.mark.parametrize("dist", [PM, GaussianSteps((1.0, 2.0)), TypeWitness(((1.0, 0.0), (0.0, 1.0)))])
def test_thread_count_independence(dist):
    spec = SpaceSpec(dist.d, 2.0)
    paths = 2 * BLOCK + 123
    a = exit_time_array(dist, 6.0, spec, paths, 10_000, seed=3, threads=1)
    b = exit_time_array(dist, 6.0, spec, paths, 10_000, seed=3, threads=8)
    np.testing.assert_array_equal(a, b)
    n1 = norm_array(dist, spec, [1, 5, 20], paths, seed=3, threads=1)
    n8 = norm_array(dist, spec, [1, 5, 20], paths, seed=3, threads=8)
    np.testing.assert_array_equal(n1, n8)


def test_tail_is_nonincreasing_with_ci():
    est = estimate_exit_time(GaussianSteps((1.0,)), 5.0, SpaceSpec(1), 5000, seed=6)
    ps = [t.p_gt for t in est.tail]
    assert all(b <= a for a, b in zip(ps, ps[1:]))
    for t in est.tail:
        assert t.ci_lo <= t.p_gt <= t.ci_hi
    assert est.p_gt(0) == 1.0
    assert est.p_le(est.tail[-1].n) == pytest.approx(1 - est.tail[-1].p_gt)


def test_tail_grid_contents():
    g = tail_grid(100.0, 10_000)
    for n in (1, 2, 4, 8, 50, 100, 200, 400):
        assert n in g
    assert all(n <= 10_000 for n in g)


def test_truncated_walk_exits_at_same_time():
    heavy = DiscreteRadial(2, (0.5, 3.0, 50.0), (0.8, 0.19, 0.01))
    tc = exit_equals_truncated_exit(heavy, 2.0, SpaceSpec(2), 5000, seed=2)
    assert tc.passed and tc.mismatches == 0


def test_sn_statistics_second_moment_is_linear_for_centered_hilbert_steps():
    dist = TypeWitness(((1.0, 0.0), (0.0, 1.0)))
    stats = sn_statistics(dist, SpaceSpec(2), [1, 10, 100], 20_000, seed=1)
    for s in stats:
        assert abs(s.mean_norm_sq - 2 * s.n) <= 4 * s.se_norm_sq + 1e-9


def test_input_validation():
    with pytest.raises(ValueError):
        estimate_exit_time(PM, 1.0, SpaceSpec(1), 50)
    with pytest.raises(ValueError):
        exit_time_array(PM, -1.0, SpaceSpec(1), 10, 10, 0)
    with pytest.raises(Exception):
        exit_time_array(PM, 1.0, SpaceSpec(2), 10, 10, 0)
    with pytest.raises(ValueError):
        norm_array(PM, SpaceSpec(1), [0], 10, 0)
