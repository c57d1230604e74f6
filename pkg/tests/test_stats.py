import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from exitwalk.stats import (MomentAccumulator, binomial_se, loglog_slope, sample_variance_se,
                            wilson_interval)


@settings(max_examples=50, deadline=None)
@given(st.lists(st.floats(-1e3, 1e3, allow_nan=False), min_size=2, max_size=300),
       st.integers(1, 299))
def test_merge_equals_single_pass(xs, cut):
    x = np.array(xs)
    cut = min(cut, len(x) - 1)
    a = MomentAccumulator().update(x[:cut])
    b = MomentAccumulator().update(x[cut:])
    a.merge(b)
    assert a.n == len(x)
    assert a.mean == pytest.approx(np.mean(x), abs=1e-9)
    assert a.var == pytest.approx(np.var(x, ddof=1), rel=1e-9, abs=1e-9)


def test_vector_accumulator():
    x = np.arange(12.0).reshape(4, 3)
    acc = MomentAccumulator(3).update(x)
    np.testing.assert_allclose(acc.mean, x.mean(axis=0))
    np.testing.assert_allclose(acc.var, x.var(axis=0, ddof=1))


def test_wilson_contains_phat_and_is_clipped():
    lo, hi = wilson_interval(0, 100)
    assert lo == 0.0 and 0 < hi < 0.05
    lo, hi = wilson_interval(50, 100)
    assert lo < 0.5 < hi
    assert wilson_interval(0, 0) == (0.0, 1.0)


def test_binomial_se():
    assert binomial_se(0.5, 100) == pytest.approx(0.05)
    assert binomial_se(0.0, 100) == 0.0


def test_sample_variance_se_gaussian():
    # for normal data se(s^2) ~ sigma^2 sqrt(2 / (n - 1))
    x = np.random.default_rng(0).normal(size=200_000)
    assert sample_variance_se(x) == pytest.approx(math.sqrt(2 / (x.size - 1)), rel=0.02)


def test_loglog_slope_exact_power_law():
    x = np.array([4.0, 16.0, 64.0])
    fit = loglog_slope(x, 3 * x ** 0.5, [0.01, 0.01, 0.01])
    assert fit["slope"] == pytest.approx(0.5)
    assert math.exp(fit["intercept"]) == pytest.approx(3.0)
    assert fit["regression_stderr"] < 1e-6   # roundoff only
    assert fit["propagated_stderr"] > 0
