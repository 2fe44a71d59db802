"""OLS / ADF / Engle-Granger against hand cases and statsmodels as an independent oracle."""

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from timebridge.data import TimeSeriesFrame
from timebridge.stats import (
    DegenerateRegressionError,
    SeriesTooShortError,
    adf_critical_value,
    adf_test,
    eg_critical_value,
    eg_pair_count,
    eg_test,
    max_lag,
    ols,
)
from timebridge.synthetic import gen_cointegrated_pair, gen_random_walk, gen_white_noise

tsa = pytest.importorskip("statsmodels.tsa.stattools")


# --- OLS ----------------------------------------------------------------------


def test_ols_exact_slope():
    x = np.arange(10.0)
    res = ols(x[:, None], 2 * x)
    assert res.coefficients[0] == pytest.approx(2.0, abs=1e-14)
    np.testing.assert_allclose(res.residuals, 0.0, atol=1e-12)


def test_ols_intercept_only_signal():
    x = np.arange(10.0)
    res = ols(np.column_stack([np.ones(10), x]), np.full(10, 3.0))
    np.testing.assert_allclose(res.coefficients, [3.0, 0.0], atol=1e-12)


def test_ols_matches_normal_equations():
    rng = np.random.default_rng(0)
    X = rng.standard_normal((50, 3))
    y = X @ [1.0, -2.0, 0.5] + 0.1 * rng.standard_normal(50)
    ref = np.linalg.solve(X.T @ X, X.T @ y)
    np.testing.assert_allclose(ols(X, y).coefficients, ref, atol=1e-10)


@settings(max_examples=30, deadline=None)
@given(st.integers(0, 10_000))
def test_ols_residuals_orthogonal_to_design(seed):
    rng = np.random.default_rng(seed)
    X = rng.standard_normal((30, 4))
    y = rng.standard_normal(30)
    res = ols(X, y)
    np.testing.assert_allclose(X.T @ res.residuals, 0.0, atol=1e-10)


def test_ols_rank_deficient_and_short():
    x = np.arange(10.0)
    with pytest.raises(DegenerateRegressionError):
        ols(np.column_stack([x, 2 * x]), x)
    with pytest.raises(SeriesTooShortError):
        ols(np.ones((2, 2)), np.ones(2))


# --- ADF ----------------------------------------------------------------------


@pytest.mark.parametrize("kind,sm", [("none", "n"), ("constant", "c"), ("constant_and_trend", "ct")])
@pytest.mark.parametrize("lags", [0, 3])
def test_adf_statistic_matches_statsmodels(kind, sm, lags):
    x = gen_random_walk(500, 1.0, 3) + 0.5 * gen_white_noise(500, 1.0, 4)
    ours = adf_test(x, kind, lags)
    ref = tsa.adfuller(x, maxlag=lags, regression=sm, autolag=None)
    assert ours.statistic == pytest.approx(ref[0], rel=1e-9)
    assert ours.n_obs == ref[3]


@pytest.mark.parametrize("seed", [0, 1, 2])
def test_adf_auto_lag_matches_statsmodels(seed):
    rng = np.random.default_rng(seed)
    e = np.zeros(800)
    for t in range(2, 800):  # AR(2) so the chosen lag is non-trivial
        e[t] = 0.5 * e[t - 1] - 0.3 * e[t - 2] + rng.standard_normal()
    ours = adf_test(e, "constant", "auto")
    ref = tsa.adfuller(e, regression="c", autolag="AIC")
    assert ours.lag_used == ref[2]
    assert ours.statistic == pytest.approx(ref[0], rel=1e-9)


def test_critical_values_match_statsmodels():
    from statsmodels.tsa.adfvalues import mackinnoncrit

    for kind, sm in [("none", "n"), ("constant", "c"), ("constant_and_trend", "ct")]:
        ref = mackinnoncrit(1, sm, 500)
        ours = [adf_critical_value(kind, s, 500) for s in (0.01, 0.05, 0.10)]
        np.testing.assert_allclose(ours, ref, rtol=1e-12)
    ref = mackinnoncrit(2, "c", 500)
    np.testing.assert_allclose([eg_critical_value(s, 500) for s in (0.01, 0.05, 0.10)], ref, rtol=1e-12)


@settings(max_examples=20, deadline=None)
@given(st.integers(0, 1000), st.floats(0.1, 100), st.floats(-1e3, 1e3))
def test_adf_affine_invariant(seed, a, b):
    x = gen_random_walk(200, 1.0, seed)
    s1 = adf_test(x, "constant", 2).statistic
    s2 = adf_test(a * x + b, "constant", 2).statistic
    assert s2 == pytest.approx(s1, rel=1e-7, abs=1e-9)


def test_adf_separates_white_noise_from_walk():
    assert adf_test(gen_white_noise(2000, 1.0, 1)).statistic < -20
    assert adf_test(gen_random_walk(2000, 1.0, 1)).statistic > -3.5


def test_adf_degenerate_inputs():
    with pytest.raises(DegenerateRegressionError):
        adf_test(np.full(50, 2.0))
    with pytest.raises(DegenerateRegressionError):
        adf_test(np.arange(100.0), "constant_and_trend")
    with pytest.raises(SeriesTooShortError):
        adf_test(np.array([1.0, 2.0, 0.5]), "constant", 1)
    with pytest.raises(ValueError):
        adf_test(np.array([1.0, np.nan, 2.0, 3.0, 1.0]))


def test_max_lag_rule():
    assert max_lag(100) == 12
    assert max_lag(10_000) == 37


# --- Engle-Granger ------------------------------------------------------------


def test_eg_flags_constructed_pair():
    x, y, _ = gen_cointegrated_pair(5000, 2.0, 0.5, 11)
    r = eg_test(x, y)
    assert r.cointegrated
    assert 1.95 <= r.beta <= 2.05


def test_eg_statistic_matches_statsmodels_coint():
    x, y, _ = gen_cointegrated_pair(400, 2.0, 3.0, 5)
    ours = eg_test(x, y, lags=2)
    ref = tsa.coint(x, y, trend="c", maxlag=2, autolag=None)
    assert ours.residual_adf.statistic == pytest.approx(ref[0], rel=1e-9)


def test_eg_independent_walks_usually_rejected():
    hits = sum(eg_test(gen_random_walk(1000, 1.0, 2 * k), gen_random_walk(1000, 1.0, 2 * k + 1)).cointegrated
               for k in range(40))
    assert hits <= 6


def test_eg_identical_series_is_degenerate():
    y = gen_random_walk(100, 1.0, 0)
    with pytest.raises(DegenerateRegressionError):
        eg_test(y, y)


def test_eg_input_checks():
    with pytest.raises(ValueError):
        eg_test(np.ones(30), np.ones(31))
    with pytest.raises(SeriesTooShortError):
        eg_test(np.arange(10.0), np.arange(10.0) ** 2)
    with pytest.raises(ValueError):
        eg_critical_value(0.2, 100)


def test_pair_count_constructions():
    w = gen_random_walk(2000, 1.0, 0)
    copies = [w] + [(k + 1) * w + 0.5 * gen_white_noise(2000, 1.0, 10 + k) for k in range(3)]
    assert eg_pair_count(np.column_stack(copies)) >= 6
    pair = np.column_stack([w + 0.3 * gen_white_noise(2000, 1.0, 20), w + 0.3 * gen_white_noise(2000, 1.0, 21)])
    assert eg_pair_count(TimeSeriesFrame(["a", "b"], pair)) == 2
    noise = np.column_stack([gen_white_noise(500, 1.0, 30 + k) for k in range(4)])
    # white noise is stationary, so EG on levels trivially rejects the unit root
    assert eg_pair_count(noise) == 12


def test_pair_count_independent_walks_near_zero():
    walks = np.column_stack([gen_random_walk(1000, 1.0, 40 + k) for k in range(5)])
    assert eg_pair_count(walks) <= 2
