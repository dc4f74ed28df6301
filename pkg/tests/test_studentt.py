"""t-distribution machinery against independent scipy oracles."""

import numpy as np
import pytest
from scipy import stats

from selftrain.studentt import betainc_reg, normal_cdf, t_cdf, t_quantile


def test_quantile_at_half_is_zero():
    for df in (1, 2, 7, 79, 500):
        assert t_quantile(0.5, df) == 0.0


def test_quantile_matches_inversion_oracle():
    # numerical-inversion oracle: scipy's ppf
    for p in (0.9, 0.95, 0.975, 0.995):
        for df in (4, 24, 79, 200):
            assert t_quantile(p, df) == pytest.approx(stats.t.ppf(p, df),
                                                      abs=1e-4)


def test_quantile_known_values():
    assert t_quantile(0.975, 79) == pytest.approx(1.9905, abs=1e-4)
    assert t_quantile(0.975, 4) == pytest.approx(2.7764, abs=1e-4)


def test_normal_limit():
    # huge df approaches the normal quantile
    assert t_quantile(0.975, 10**6) == pytest.approx(stats.norm.ppf(0.975),
                                                     abs=1e-4)


def test_symmetry():
    for p in (0.6, 0.9, 0.99):
        for df in (3, 30):
            assert t_quantile(1 - p, df) == pytest.approx(-t_quantile(p, df),
                                                          abs=1e-12)


def test_monotone_in_p_and_df():
    ps = [0.55, 0.7, 0.9, 0.975, 0.999]
    for df in (2, 10, 100):
        qs = [t_quantile(p, df) for p in ps]
        assert all(a < b for a, b in zip(qs, qs[1:]))
    dfs = [1, 2, 5, 20, 100, 1000]
    for p in (0.9, 0.975):
        qs = [t_quantile(p, df) for df in dfs]
        assert all(a > b for a, b in zip(qs, qs[1:]))


def test_quantile_rejects_bad_levels():
    for p in (0.0, 1.0, -0.2, 1.5):
        with pytest.raises(ValueError):
            t_quantile(p, 10)


def test_cdf_matches_scipy():
    rng = np.random.default_rng(42)
    for _ in range(200):
        t = rng.uniform(-8, 8)
        df = rng.integers(1, 300)
        assert t_cdf(t, df) == pytest.approx(stats.t.cdf(t, df), abs=1e-12)


def test_betainc_matches_scipy():
    from scipy.special import betainc
    rng = np.random.default_rng(7)
    for _ in range(200):
        a = rng.uniform(0.2, 50)
        b = rng.uniform(0.2, 50)
        x = rng.uniform(0, 1)
        assert betainc_reg(a, b, x) == pytest.approx(betainc(a, b, x),
                                                     abs=1e-12)


def test_normal_cdf():
    assert normal_cdf(0.0) == 0.5
    assert normal_cdf(2.0) == pytest.approx(stats.norm.cdf(2.0), abs=1e-15)
