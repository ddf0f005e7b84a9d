import numpy as np
import pytest

from caplab.errors import ValidationError
from caplab.stats import (batch_stats, fit_line, fit_loglog,
                          fit_through_origin, fourth_moment_ratio,
                          lindeberg_sum, normality_ks)


def test_batch_stats_recovers_mean_and_se():
    rng = np.random.default_rng(0)
    x = rng.normal(5.0, 2.0, size=4000)
    bs = batch_stats(x)
    assert bs.mean == pytest.approx(5.0, abs=0.15)
    # batch-means SE tracks the iid SE for independent samples
    assert bs.se == pytest.approx(2.0 / np.sqrt(4000), rel=0.5)


def test_batch_stats_requires_enough_batches():
    with pytest.raises(ValidationError):
        batch_stats(np.ones(100), batches=5)
    with pytest.raises(ValidationError):
        batch_stats(np.ones(10))


def test_fit_through_origin_exact_on_linear_data():
    x = np.array([1.0, 2.0, 4.0, 8.0])
    fit = fit_through_origin(x, 3.5 * x)
    assert fit.slope == pytest.approx(3.5)
    assert fit.r_squared == pytest.approx(1.0)
    assert fit.covers(3.5)


def test_fit_line_recovers_noisy_slope():
    rng = np.random.default_rng(1)
    x = np.linspace(0, 10, 200)
    y = 2.0 + 0.7 * x + rng.normal(0, 0.3, size=200)
    fit = fit_line(x, y)
    assert fit.covers(0.7)
    assert fit.intercept == pytest.approx(2.0, abs=0.2)
    assert fit.r_squared > 0.9


def test_fit_loglog_power_law():
    n = np.array([2 ** k for k in range(6, 14)], dtype=float)
    fit = fit_loglog(n, 1.7 * np.sqrt(n))
    assert fit.slope == pytest.approx(0.5, abs=1e-12)
    with pytest.raises(ValidationError):
        fit_loglog(n, -np.sqrt(n))


def test_lindeberg_sum_gaussian_values():
    rng = np.random.default_rng(2)
    z = rng.normal(size=200_000)
    # for a standard normal, E[Z^2; |Z|>eps] is explicit via the tails
    val = lindeberg_sum(z, 1.0)
    from scipy import stats as sps
    expect = 2 * (sps.norm.sf(1.0) + sps.norm.pdf(1.0))
    assert val == pytest.approx(expect, rel=0.05)
    assert lindeberg_sum(z, 0.0) == pytest.approx(1.0, rel=0.02)
    assert lindeberg_sum(z, 5.0) < 1e-3


def test_normality_ks_distinguishes():
    rng = np.random.default_rng(3)
    assert normality_ks(rng.normal(3.0, 0.5, size=1000)) > 0.01
    # the table-based p-value bottoms out near 1e-3
    assert normality_ks(rng.exponential(size=1000)) < 0.005


def test_fourth_moment_ratio_gaussian_is_three():
    rng = np.random.default_rng(4)
    assert fourth_moment_ratio(rng.normal(size=400_000)) == \
        pytest.approx(3.0, rel=0.05)
