import math

import numpy as np
import pytest

from exitwalk import (DiscreteRadial, FixedSubsetRademacher, GaussianSteps, PointMass,
                      RandomSubsetRademacher, Shifted, SpaceSpec, TypeWitness)
from exitwalk.harness import (BoundCheckResult, CapPolicy, gaussian_sum_second_moment,
                              predicted_ratio, run_exit_suite, run_functionals_suite,
                              run_gaussian_bounds, run_lemma_implication_checks, run_pruitt_suite,
                              run_scaling_experiment, run_type_witness_convergence)

SCALAR = DiscreteRadial(1, (1.0,), (1.0,), "axis")


def test_check_fails_only_beyond_z_se():
    c = BoundCheckResult("demo", z=3.0)
    c.add("inside", 1.05, 1.0, 0.02)       # 2.5 se over: tolerated
    assert c.passed
    c.add("outside", 1.07, 1.0, 0.02)      # 3.5 se over
    assert not c.passed and len(c.failures) == 1
    assert c.worst.label == "outside"
    s = c.summary()
    assert s["failures"] == 1 and s["worst_margin"] == pytest.approx(-0.07)


def test_exact_points_have_only_roundoff_slack():
    c = BoundCheckResult("exact")
    c.add("tie", 1.0 + 1e-13, 1.0)
    assert c.passed
    c.add("over", 1.0 + 1e-9, 1.0)
    assert not c.passed


def test_informational_never_fails():
    c = BoundCheckResult("info", informational=True)
    c.add("x", 10.0, 1.0)
    assert c.passed and c.failures


def test_cap_policy():
    assert CapPolicy(factor=200).cap(0.5) == 400
    assert CapPolicy(fixed=17).cap(0.5) == 17
    assert CapPolicy().cap(0.0) > 10 ** 8


def test_functionals_suite_small():
    dists = [DiscreteRadial(3, (0.5, 2.0, 7.0), (0.5, 0.3, 0.2)), RandomSubsetRademacher(6, 2),
             GaussianSteps((1.0,)), Shifted(DiscreteRadial(2, (1.0,), (1.0,)), (0.3, 0.0)),
             PointMass((1.0, 0.0))]
    res = run_functionals_suite(dists, 2.0, [1.5 * 1.5 ** i for i in range(8)], seed=1,
                                hd_pairs=50, n_mc=50_000, moment_samples=50_000)
    ids = {c.bound_id: c for c in res.checks}
    assert res.passed, [c.summary() for c in res.checks if not c.passed]
    for cid in ("h_le_2", "q2_identity", "hd_bounds", "h_limit", "truncated_moment_check"):
        assert ids[cid].points
    assert res.constants["max_q2_residual"] < 1e-12


def test_exit_suite_small():
    res = run_exit_suite([SCALAR, GaussianSteps((1.0, 1.0))], 2.0, [4.0], [1, 4, 16], 3000,
                         seed=2, n_mc=50_000, sn_paths=3000, truncation_paths=1000)
    assert res.passed, [c.summary() for c in res.checks if not c.passed]
    assert {"exit", "tail", "sn"} <= set(res.tables)
    assert res.constants["max_var_over_4nEX2"] <= 1.0


def test_pruitt_suite_flags_non_hilbert_as_informational():
    res = run_pruitt_suite([RandomSubsetRademacher(4, 1)], 4.0, [2.0, 4.0], 1000, seed=3,
                           n_mc=50_000)
    assert all(c.informational for c in res.checks)
    res2 = run_pruitt_suite([SCALAR, PointMass((1.0,))], 2.0, [2.0, 4.0, 8.0], 1000, seed=3)
    assert not res2.checks[0].informational and res2.passed
    assert any("degenerate" in n for n in res2.notes)


def test_pruitt_band_failure_is_reported():
    # a band of 1 cannot hold over a wide grid
    res = run_pruitt_suite([SCALAR], 2.0, [0.5, 2.0, 8.0], 2000, seed=4, band=1.0)
    assert not res.passed


def test_scaling_small():
    rep = run_scaling_experiment(4.0, [4, 8, 16], 1, [4.0, 4.8, 5.7, 6.7], 1000, seed=5,
                                 control_k=[1, 2])
    assert rep.expected_slope == 0.5 and rep.slope_tol == 0.15
    assert set(rep.plateaus) == {4, 8, 16}
    assert rep.plateaus[16][0] > rep.plateaus[4][0]
    suite = rep.to_suite()
    assert "scaling_p4" in suite.tables and "scaling_fit_p4" in suite.plots
    with pytest.raises(ValueError):
        run_scaling_experiment(1.5, [4, 8, 16], 1, [4.0], 1000, seed=5)
    with pytest.raises(ValueError):
        run_scaling_experiment(4.0, [4, 8], 1, [4.0], 1000, seed=5)


def test_predicted_ratio_random_subset():
    # E||X||^2 = k^(2/p), surrogate (d (k/d)^(p/2))^(2/p) -> ratio (d/k)^(1 - 2/p)
    for d, k, p in [(16, 1, 4.0), (64, 4, 4.0), (10, 2, 2.0)]:
        assert predicted_ratio(RandomSubsetRademacher(d, k), p) == pytest.approx((d / k) ** (1 - 2 / p))


def test_gaussian_bounds_small():
    dist = RandomSubsetRademacher(8, 1)
    res = run_gaussian_bounds(dist, SpaceSpec(8, 4.0), [2.0, 2.8, 4.0, 5.7], 1000, seed=6,
                              n_mc=50_000)
    assert res.passed
    with pytest.raises(ValueError):
        run_gaussian_bounds(Shifted(dist, (0.1,) + (0.0,) * 7), SpaceSpec(8, 4.0), [2.0], 1000, 6)


def test_gaussian_sum_oracle_at_p2():
    V = np.array([[1.0, 0.0], [0.0, 1.0], [0.5, 0.5]])
    m, se = gaussian_sum_second_moment(V, SpaceSpec(2), 200_000, seed=7)
    assert abs(m - 2.5) <= 4 * se


def test_witness_small():
    res = run_type_witness_convergence([[1.0, 0.0], [0.0, 1.0]], 2.0, [1, 10, 100], 2000, seed=8,
                                       gauss_samples=100_000, moment_samples=100_000)
    assert res.passed
    assert res.constants["sum_norm_sq"] == 2.0


def test_lemma_checks_small():
    res = run_lemma_implication_checks(SCALAR, SpaceSpec(1), [4.0, 8.0], None, 2000, seed=9)
    assert res.passed, [c.summary() for c in res.checks if not c.passed]
    ids = {c.bound_id for c in res.checks}
    assert {"expectation_lower_implies_tail", "tail_implies_expectation_upper"} <= ids
