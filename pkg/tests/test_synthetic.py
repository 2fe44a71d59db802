import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from timebridge.stats import adf_test
from timebridge.synthetic import (
    adf_calibration,
    direct_score_sum,
    gen_cointegrated_channels,
    gen_cointegrated_pair,
    gen_random_walk,
    gen_trend_sinusoid,
    generate,
    monte_carlo_patch_score,
    prop1_report,
    spurious_score_expectation,
    trend_sinusoid_params,
)


def test_random_walk_variance_and_covariance():
    paths = np.stack([gen_random_walk(100, 1.0, s) for s in range(10_000)])
    assert abs(paths[:, 99].var() - 100) < 5
    cov = np.mean(paths[:, 49] * paths[:, 99]) - paths[:, 49].mean() * paths[:, 99].mean()
    assert abs(cov - 50) < 4


def test_random_walk_determinism():
    np.testing.assert_array_equal(gen_random_walk(50, 1.0, 3), gen_random_walk(50, 1.0, 3))
    assert not np.array_equal(gen_random_walk(50, 1.0, 3), gen_random_walk(50, 1.0, 4))


def test_cointegrated_pair_identity():
    x, y, eta = gen_cointegrated_pair(5000, 2.0, 0.5, 1)
    # equality up to the rounding of 2y + eta
    np.testing.assert_allclose(x - 2.0 * y, eta, rtol=0, atol=4 * np.finfo(float).eps * np.abs(x).max())
    assert adf_test(x - 2.0 * y, "constant", 0).statistic < -20


def test_trend_sinusoid_reproducible_from_params():
    p = trend_sinusoid_params(200, 3, 5, noise_sigma=0.0)
    frame = gen_trend_sinusoid(200, 3, 5, noise_sigma=0.0)
    assert frame.values.shape == (200, 3)
    np.testing.assert_array_equal(frame.values, p.clean())


def test_cointegrated_channels_share_trend():
    f = gen_cointegrated_channels(3000, 4, 0)
    assert f.values.shape == (3000, 4)
    # any pair has a stationary linear combination; levels alone do not
    assert adf_test(f.values[:, 0]).statistic > -3.5


@pytest.mark.parametrize("kind", ["random_walk", "white_noise", "cointegrated_pair", "trend_sinusoid",
                                  "cointegrated_channels"])
def test_generate_dispatch(kind):
    a = generate(kind, 100, 3, seed=7)
    b = generate(kind, 100, 3, seed=7)
    np.testing.assert_array_equal(a.values, b.values)
    assert a.T == 100


def test_generate_unknown_kind():
    with pytest.raises(ValueError):
        generate("brownian_bridge", 10)


# --- closed form ----------------------------------------------------------------


def test_closed_form_base_case():
    assert spurious_score_expectation(1, 0, 0, 0) == 1.0


@settings(max_examples=100, deadline=None)
@given(st.integers(1, 20), st.integers(0, 200), st.integers(0, 40), st.integers(0, 40), st.floats(0.1, 3))
def test_closed_form_matches_direct_sum(S, t, i, j, sigma):
    a = spurious_score_expectation(S, t, i, j, sigma)
    assert a == pytest.approx(direct_score_sum(S, t, i, j, sigma), rel=1e-12)
    assert a == spurious_score_expectation(S, t, j, i, sigma)


@settings(max_examples=50, deadline=None)
@given(st.integers(1, 20), st.integers(0, 100), st.integers(0, 20), st.integers(0, 20))
def test_closed_form_monotone(S, t, i, j):
    base = spurious_score_expectation(S, t, i, j)
    assert spurious_score_expectation(S + 1, t, i, j) >= base
    assert spurious_score_expectation(S, t + 1, i, j) >= base
    assert spurious_score_expectation(S, t, i + 1, j + 1) >= base


def test_closed_form_rejects_negative():
    with pytest.raises(ValueError):
        spurious_score_expectation(0, 1, 1, 1)


# --- Monte-Carlo ------------------------------------------------------------------


def test_monte_carlo_raw_score():
    mc = monte_carlo_patch_score(8, 100, 0, 16, 1.0, False, 50_000, 0)
    assert abs(mc - 836.0) / 836.0 < 0.05


def test_monte_carlo_sigma_scaling():
    a = monte_carlo_patch_score(4, 20, 0, 4, 1.0, False, 20_000, 1)
    b = monte_carlo_patch_score(4, 20, 0, 4, 2.0, False, 20_000, 1)
    assert b / a == pytest.approx(4.0, rel=1e-12)  # same draws, scaled


def test_monte_carlo_detrended_modes():
    S = 8
    cross = monte_carlo_patch_score(S, 100, 0, 16, 1.0, True, 50_000, 2)
    same = monte_carlo_patch_score(S, 100, 0, 0, 1.0, True, 50_000, 3)
    assert abs(cross) < 0.05 * S
    assert abs(same - S) / S < 0.05


def test_monte_carlo_thread_count_does_not_change_result(monkeypatch):
    monkeypatch.setenv("TIMEBRIDGE_THREADS", "1")
    a = monte_carlo_patch_score(4, 10, 0, 4, 1.0, False, 5000, 9)
    monkeypatch.setenv("TIMEBRIDGE_THREADS", "4")
    b = monte_carlo_patch_score(4, 10, 0, 4, 1.0, False, 5000, 9)
    assert a == b


def test_monte_carlo_needs_enough_trials():
    with pytest.raises(ValueError):
        monte_carlo_patch_score(4, 10, 0, 4, trials=10)


def test_prop1_report_fields():
    r = prop1_report(8, 100, 0, 16, 1.0, 50_000, 0)
    assert r["closed_form"] == 836.0
    assert r["rel_err"] < 0.05
    assert r == prop1_report(8, 100, 0, 16, 1.0, 50_000, 0)


def test_adf_calibration_is_seeded():
    a = adf_calibration("random_walk", 500, 10, 3)
    b = adf_calibration("random_walk", 500, 10, 3)
    assert a["statistics"] == b["statistics"]
    with pytest.raises(ValueError):
        adf_calibration("ar1", 500, 10, 3)
