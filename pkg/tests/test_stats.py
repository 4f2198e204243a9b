import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from palmflow.stats import (
    EmpiricalDistribution,
    Estimate,
    binomial_se,
    combined_se,
    dkw_epsilon,
    fsum_mean,
    ks_two_sample_threshold,
    mean_se,
    ratio_se,
)


def test_estimate_rejects_negative_se():
    with pytest.raises(ValueError):
        Estimate(1.0, -0.1)
    assert Estimate(1.0, 0.5).to_dict() == {"value": 1.0, "se": 0.5}


def test_fsum_mean_compensated():
    x = np.array([1e16, 1.0, -1e16, 1.0])
    assert fsum_mean(x) == 0.5
    assert math.isnan(fsum_mean([]))


def test_mean_se_matches_numpy():
    x = np.random.default_rng(0).normal(size=500)
    e = mean_se(x)
    assert e.value == pytest.approx(x.mean())
    assert e.se == pytest.approx(x.std(ddof=1) / math.sqrt(x.size))
    with pytest.raises(ValueError):
        mean_se([])


def test_weighted_mean_uniform_weights():
    x = np.arange(10.0)
    assert mean_se(x, np.full(10, 3.0)).value == pytest.approx(mean_se(x).value)
    assert mean_se(x, np.full(10, 3.0)).se == pytest.approx(mean_se(x).se)


def test_ratio_se():
    num, den = np.array([1.0, 2.0, 3.0]), np.array([1.0, 1.0, 1.0])
    assert ratio_se(num, den).value == pytest.approx(2.0)
    with pytest.raises(ZeroDivisionError):
        ratio_se(num, np.zeros(3))


def test_small_helpers():
    assert binomial_se(0.5, 100) == pytest.approx(0.05)
    assert binomial_se(0.5, 0) == 0.0
    assert combined_se(3.0, 4.0) == 5.0
    assert dkw_epsilon(10**5) == pytest.approx(math.sqrt(math.log(2000) / 2e5))
    assert dkw_epsilon(0) == math.inf
    assert ks_two_sample_threshold(100, 100) > ks_two_sample_threshold(1000, 1000)


def test_empirical_distribution_steps():
    d = EmpiricalDistribution([3.0, 1.0, 2.0, 2.0])
    assert d.cdf(0.5) == 0.0 and d.cdf(1.0) == 0.25 and d.cdf(2.0) == 0.75 and d.cdf(9) == 1.0
    assert d.survival(2.0) == 0.25
    assert d.mean() == 2.0
    assert d.quantile(0.5) == 2.0
    # int_1^inf S = mean of (X - 1)^+ = (0 + 1 + 1 + 2) / 4
    assert d.integral_survival(1.0) == 1.0
    assert d.integral_survival(0.0) == d.mean()
    with pytest.raises(ValueError):
        EmpiricalDistribution([np.nan])


def test_weighted_empirical():
    d = EmpiricalDistribution([1.0, 2.0], weights=[3.0, 1.0])
    assert d.cdf(1.0) == 0.75 and d.mean() == 1.25


def test_sup_distance():
    a = EmpiricalDistribution([0.0, 1.0])
    b = EmpiricalDistribution([0.0, 2.0])
    assert a.sup_distance(b) == 0.5
    u = EmpiricalDistribution([0.5])
    assert u.sup_distance(lambda x: np.clip(x, 0, 1)) == 0.5


@given(st.lists(st.floats(-100, 100), min_size=1, max_size=40), st.floats(-100, 100))
def test_integral_survival_is_mean_excess(xs, lo):
    d = EmpiricalDistribution(xs)
    assert d.integral_survival(lo) == pytest.approx(np.mean(np.maximum(np.array(xs) - lo, 0)), abs=1e-9)
    grid = np.linspace(-101, 101, 25)
    s = d.survival(grid)
    assert np.all(np.diff(s) <= 0) and np.all((0 <= s) & (s <= 1))
