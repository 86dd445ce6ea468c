import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy import stats

from mbmf.errors import EmptyDataError, ParameterError
from mbmf.ingest import Calendar, mean_wait_grid
from mbmf.surrogates import day_streams, poisson_surrogate, shuffle_events, shuffle_surrogate
from mbmf.synthetic import (ThreeExtremaModel, events_from_waits, fgn, fgn_autocovariance,
                            fgn_mean_wait_grid, lrc_event_series, lrc_lognormal_waits)


def test_poisson_is_reproducible():
    a = poisson_surrogate(1 / 15, seed=3, n_days=5)
    b = poisson_surrogate(1 / 15, seed=3, n_days=5)
    c = poisson_surrogate(1 / 15, seed=4, n_days=5)
    np.testing.assert_array_equal(a.timestamps, b.timestamps)
    assert a.n_events != c.n_events or not np.array_equal(a.timestamps, c.timestamps)
    assert a.meta == {"rng": "PCG64", "seed": 3, "kind": "poisson", "per_day": True,
                      "mean_rate": pytest.approx(1 / 15)}


def test_poisson_days_are_independent_streams():
    """A day's events depend only on the seed and the day number."""
    short = poisson_surrogate(1 / 15, seed=8, n_days=3)
    long = poisson_surrogate(1 / 15, seed=8, n_days=6)
    n = short.n_events
    np.testing.assert_array_equal(long.trading_time[:n], short.trading_time)


def test_poisson_rate_and_exponential_waits():
    ev = poisson_surrogate(1 / 15, seed=1, n_days=40)
    T = 28200
    assert ev.n_days == 40
    assert ev.n_events / (40 * T) == pytest.approx(1 / 15, rel=0.02)
    w = np.diff(ev.local_time)[np.diff(ev.day_index) == 0]
    assert stats.kstest(w, "expon", args=(0, 15)).pvalue > 0.01


def test_poisson_from_template_rates():
    base = poisson_surrogate(np.array([0.05, 0.2]), seed=2)
    counts = np.bincount(base.day_index)
    assert counts[1] > 2.5 * counts[0]
    again = poisson_surrogate(base, seed=5)
    np.testing.assert_allclose(np.bincount(again.day_index) / counts, 1, atol=0.1)
    grid = mean_wait_grid(base, 1)
    assert poisson_surrogate(grid, seed=6).n_days == 2
    flat = poisson_surrogate(base, seed=5, per_day=False)
    np.testing.assert_allclose(*np.bincount(flat.day_index), rtol=0.1)


@pytest.mark.parametrize("rate", [0.0, -1.0, np.nan])
def test_poisson_rejects_bad_rates(rate):
    with pytest.raises(ParameterError):
        poisson_surrogate(rate, seed=0, n_days=2)


def test_poisson_single_rate_needs_days():
    with pytest.raises(ParameterError):
        poisson_surrogate(0.1, seed=0)


def test_poisson_custom_session():
    ev = poisson_surrogate(0.5, seed=0, n_days=3, calendar=Calendar(session_duration_s=600))
    assert np.all(ev.local_time < 600)


@settings(max_examples=40, deadline=None)
@given(st.lists(st.floats(0.0, 1e4), min_size=1, max_size=200), st.integers(0, 2**32 - 1),
       st.integers(1, 5))
def test_shuffle_preserves_multiset(waits, seed, passes):
    out = shuffle_surrogate(waits, seed, passes)
    np.testing.assert_array_equal(np.sort(out), np.sort(waits))


def test_shuffle_is_seeded_and_moves_values():
    w = np.arange(1000.0)
    a, b = shuffle_surrogate(w, 1), shuffle_surrogate(w, 1)
    np.testing.assert_array_equal(a, b)
    assert not np.array_equal(a, w)


def test_shuffle_errors():
    with pytest.raises(EmptyDataError):
        shuffle_surrogate([], 0)
    with pytest.raises(ParameterError):
        shuffle_surrogate([1.0], 0, passes=0)


def test_shuffle_removes_lag_correlation():
    w = lrc_lognormal_waits(20000, 0.9, seed=1)
    s = shuffle_surrogate(w, seed=2)
    r_orig = np.corrcoef(w[:-1], w[1:])[0, 1]
    r_shuf = np.corrcoef(s[:-1], s[1:])[0, 1]
    assert r_orig > 0.2
    assert abs(r_shuf) < 4 / np.sqrt(w.size)


def test_shuffle_events_keeps_span_and_days():
    ev = lrc_event_series(5, 0.8, seed=0, mean=5.0)
    sh = shuffle_events(ev, seed=1)
    assert sh.n_events == ev.n_events
    np.testing.assert_array_equal(sh.session_days, ev.session_days)
    assert sh.trading_time[0] == ev.trading_time[0]
    assert sh.trading_time[-1] == pytest.approx(ev.trading_time[-1], abs=1e-6)
    np.testing.assert_allclose(np.sort(np.diff(sh.trading_time)), np.sort(np.diff(ev.trading_time)),
                               atol=1e-6)


def test_day_streams_distinct():
    a, b = day_streams(0, 2)
    assert a.random() != b.random()


def test_fgn_statistics():
    H = 0.75
    x = fgn(4096, H, np.random.default_rng(0), size=50)
    assert x.var() == pytest.approx(1, rel=0.05)
    lag1 = np.mean(x[:, :-1] * x[:, 1:])
    assert lag1 == pytest.approx(2 ** (2 * H - 1) - 1, abs=0.03)
    np.testing.assert_allclose(fgn_autocovariance(0.5, 4), [1, 0, 0, 0], atol=1e-12)


def test_fgn_rejects_bad_hurst():
    with pytest.raises(ParameterError):
        fgn(10, 1.2, np.random.default_rng(0))


def test_fgn_grid_shape():
    g = fgn_mean_wait_grid(3, 94, 0.6, seed=1)
    assert g.means.shape == (3, 94)
    assert g.session_duration_s == 28200
    with pytest.raises(ParameterError):
        fgn_mean_wait_grid(3, 7, 0.6, seed=1)


def test_events_from_waits_truncates():
    ev = events_from_waits(np.full(100, 1000.0), n_days=2)
    assert ev.n_days == 2
    assert np.all(ev.trading_time < 2 * 28200)


def test_lrc_cap():
    w = lrc_lognormal_waits(5000, 0.8, seed=0, mean=2.0, max_wait=20.0)
    assert w.max() <= 20.0


def test_three_extrema_polynomials():
    m = ThreeExtremaModel()
    assert m.h_poly.degree() == 5
    q = np.linspace(-3, 3, 7)
    np.testing.assert_allclose(m.tau(q), q * m.h(q) - m.h(1.0), atol=1e-12)
    np.testing.assert_allclose(m.dalpha(np.array([m.q_b, m.q_a, m.q_c])), 0, atol=1e-12)
    with pytest.raises(ParameterError):
        ThreeExtremaModel(q_b=1.0, q_a=0.0)
