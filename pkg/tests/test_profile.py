import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from mbmf.errors import FitError, ParameterError
from mbmf.ingest import MeanWaitGrid
from mbmf.profile import (DayProfile, autocorrelation, day_profile, detrend, detrend_profiles,
                          ensemble_autocorrelation, fit_decay, fluctuation, fluctuation_table,
                          multi_day_profile)


def _grid(means):
    means = np.atleast_2d(np.asarray(means, dtype=float))
    return MeanWaitGrid(scale_s=means.shape[1], delta=1, means=means,
                        counts=np.ones(means.shape, dtype=np.int64))


def test_day_profile_is_cumulative():
    np.testing.assert_allclose(day_profile(_grid([1, 2, 3]), 0).values, [1, 3, 6])


def test_multi_day_profile():
    np.testing.assert_allclose(multi_day_profile(_grid([[1, 1], [1, 1]])), [1, 2, 3, 4])


def test_day_out_of_range():
    with pytest.raises(ParameterError):
        day_profile(_grid([1, 2, 3]), 1)


def test_exact_cubic_is_removed():
    """A cubic profile is fitted exactly; coefficients come back highest power first."""
    i = np.arange(1, 95, dtype=float)
    U = 1 + 2 * i + 0.5 * i**2 + 0.01 * i**3
    d = detrend(DayProfile(0, U))
    assert np.max(d.deviations) <= 1e-9 * np.max(np.abs(U))
    np.testing.assert_allclose(d.coefficients, [0.01, 0.5, 2, 1], rtol=1e-8)


def test_too_short_for_degree():
    with pytest.raises(FitError):
        detrend(DayProfile(0, np.arange(4.0)), degree=3)


@pytest.mark.parametrize("d, lag, want", [
    (np.full(7, 3.0), 0, 9.0),
    (np.array([1.0, 2.0]), 1, 2.0),
    (np.array([1.0, 2.0, 3.0]), 0, 14 / 3),
])
def test_fluctuation_values(d, lag, want):
    assert fluctuation(d, lag) == pytest.approx(want)


def test_lag_out_of_range():
    with pytest.raises(ParameterError):
        fluctuation(np.ones(3), 3)


def test_autocorrelation_matches_fluctuation():
    rng = np.random.default_rng(1)
    d = rng.random((3, 20))
    A = autocorrelation(d)
    for j in (0, 1, 7, 19):
        np.testing.assert_allclose(A[:, j], [fluctuation(row, j) for row in d])


def test_ensemble_average():
    table = fluctuation_table([_grid(np.random.default_rng(2).random((2, 10)) + 1)], lags=[10])
    curve = ensemble_autocorrelation(table, 10)
    np.testing.assert_allclose(curve.values, table.lagged[10].mean(axis=0))
    assert curve.mean_sq_dev == pytest.approx(table.F2[0].mean())


def test_ensemble_single_day():
    table = fluctuation_table([_grid(np.arange(1.0, 11.0)[None] ** 1.5)], lags=[10])
    np.testing.assert_allclose(ensemble_autocorrelation(table, 10).values, table.lagged[10][0])


@settings(max_examples=30, deadline=None)
@given(arrays(np.float64, 12, elements=st.floats(0.1, 100)), st.floats(-5, 5), st.floats(-1, 1))
def test_adding_trend_leaves_deviations(means, c0, c1):
    """A polynomial of degree <= 3 added to the profile is absorbed by the trend."""
    U = np.cumsum(means)
    i = np.arange(1, 13)
    _, dev = detrend_profiles(U)
    _, dev2 = detrend_profiles(U + c0 + c1 * i**3)
    np.testing.assert_allclose(dev2, dev, atol=1e-7 * (1 + np.abs(U).max() + abs(c1) * 1728))


@settings(max_examples=30, deadline=None)
@given(arrays(np.float64, (3, 16), elements=st.floats(0.1, 100)), st.floats(0.01, 100))
def test_scaling_means_scales_F2(means, lam):
    base = fluctuation_table([_grid(means)]).F2
    scaled = fluctuation_table([_grid(lam * means)]).F2
    assert np.all(base >= 0)
    np.testing.assert_allclose(scaled, lam**2 * base, rtol=1e-8, atol=1e-12 * lam**2 * (1 + base.max()))


def test_iid_deviations_decorrelate():
    """For i.i.d. waits the lagged fluctuation tends to the squared mean deviation."""
    rng = np.random.default_rng(3)
    grid = _grid(rng.exponential(15, (400, 94)))
    table = fluctuation_table([grid], lags=[94])
    curve = ensemble_autocorrelation(table, 94)
    assert curve.values[0] > curve.sq_mean_abs_dev
    assert curve.values[60] < curve.values[1]


@pytest.mark.parametrize("model, truth", [
    ("exponential", {"A": 12.06, "a": 0.496, "const": 23.12}),
    ("power", {"A": 1049.0, "a": 1.0, "alpha": 0.49, "const": 1519.0}),
])
def test_decay_fit_recovers_parameters(model, truth):
    rng = np.random.default_rng(4)
    j = np.arange(1, 41, dtype=float)
    if model == "exponential":
        y = truth["A"] * np.exp(-truth["a"] * j) + truth["const"]
    else:
        y = truth["A"] / (truth["a"] + j) ** truth["alpha"] + truth["const"]
    y = y + rng.normal(0, 0.01, j.size)
    fit = fit_decay(y, model=model, lags=j)
    for k in truth:
        assert abs(fit.params[k] - truth[k]) <= 3 * fit.errors[k] + 1e-9
    np.testing.assert_allclose(fit.predict(j), y, atol=0.05)


def test_constant_curve_has_no_amplitude():
    fit = fit_decay(np.full(20, 5.0))
    assert abs(fit.params["A"]) < 1e-6
    assert fit.params["const"] == pytest.approx(5.0)


def test_decay_fit_needs_points():
    with pytest.raises(FitError):
        fit_decay(np.ones(3))


def test_unknown_model():
    with pytest.raises(ParameterError):
        fit_decay(np.arange(10.0), model="stretched")
