import numpy as np
import pytest
import sympy as sp
from hypothesis import given, settings
from hypothesis import strategies as st

from mbmf.errors import DomainError, ParameterError
from mbmf.oracle import (CubicModel, cubic_eval, d2f_dalpha2, oracle_table, q_of_alpha,
                         spectrum_of_alpha, window_average_powerlaw)


def test_contact_value(cubic):
    assert cubic.contact_value == 1.0
    p = cubic_eval(cubic, 1.0)
    assert p.f == p.alpha == p.D == 1.0
    assert p.h == 3.0 and p.tau == 0.0


def test_spot_values(cubic):
    p = cubic_eval(cubic, np.array([0.0, 2.0]))
    np.testing.assert_allclose(p.tau, [-3, -3])
    np.testing.assert_allclose(p.D, [3, -3])
    np.testing.assert_allclose(p.alpha, [4, -8])
    np.testing.assert_allclose(p.c_heat, [0, 48])
    np.testing.assert_allclose([p.h_rel[1], p.tau_rel[1], p.D_rel[1]], [-3, -6, -6])


def test_unshifted_spectrum_is_off_contact(cubic):
    """Without the shift f(alpha(1)) sits c - a below the diagonal."""
    p = cubic_eval(cubic, 1.0, shifted=False)
    assert p.alpha - p.f == pytest.approx(cubic.c - cubic.a)


def test_closed_forms_match_symbolic_derivation():
    """Every closed form follows from tau by differentiation and the Legendre transform."""
    q, a, c = sp.symbols("q a c", real=True)
    h = -a * q**2 + c
    tau = q * h - h.subs(q, 1)
    alpha = sp.diff(tau, q)
    f = q * alpha - tau
    D = sp.cancel(tau / (q - 1))
    model = CubicModel(a=1.7, c=2.3)
    subs = {a: model.a, c: model.c}
    qs = np.linspace(-3, 3, 13)
    p = cubic_eval(model, qs)
    for expr, got in [(tau, p.tau), (alpha, p.alpha), (f, p.f), (D, p.D),
                      (-q**2 * sp.diff(alpha, q), p.c_heat),
                      (h - h.subs(q, 1), p.h_rel),
                      (sp.cancel(q * (h - h.subs(q, 1)) / (q - 1)), p.D_rel)]:
        fn = sp.lambdify(q, expr.subs(subs), "numpy")
        np.testing.assert_allclose(np.broadcast_to(fn(qs), qs.shape), got, atol=1e-12)


def test_branches_of_alpha(cubic):
    qm, qp = q_of_alpha(cubic, 1.0)
    assert (qm, qp) == (-1.0, 1.0)
    f_neg, f_pos = spectrum_of_alpha(cubic, 1.0)
    assert f_pos == pytest.approx(1.0)
    assert f_neg == pytest.approx(cubic_eval(cubic, -1.0).f)
    with pytest.raises(DomainError):
        q_of_alpha(cubic, 4.5)


@settings(max_examples=50, deadline=None)
@given(st.floats(0.05, 3.0))
def test_second_derivative_is_inverse_slope(qv):
    """d2f/dalpha2 = dq/dalpha = -1/(6aq) by a finite difference along the branch."""
    model = CubicModel()
    eps = 1e-5 * qv
    a = cubic_eval(model, np.array([qv - eps, qv + eps]))
    # df/dalpha = q, so the second derivative is the inverse of dalpha/dq
    slope = 2 * eps / (a.alpha[1] - a.alpha[0])
    assert d2f_dalpha2(model, qv) == pytest.approx(slope, rel=1e-6)


def test_model_needs_positive_a():
    with pytest.raises(ParameterError):
        CubicModel(a=0.0)


def test_oracle_table_columns(cubic):
    tab = oracle_table(cubic, [-1.0, 0.0, 1.0])
    assert set(tab) >= {"q", "h", "tau", "D", "alpha", "f", "c_heat"}
    np.testing.assert_allclose(tab["c_heat"], [-6, 0, 6])


@pytest.mark.parametrize("alpha", [0.3, 0.5, 1.0])
def test_window_average_close_to_pointwise(alpha):
    w = window_average_powerlaw(alpha, np.array([100.0, 1000.0]), 1.0)
    assert np.all(np.abs(w.relative_deviation) < 0.01 * (1 + alpha))
    assert np.all(w.relative_deviation < 0)


def test_window_average_warns_for_wide_windows():
    with pytest.warns(UserWarning):
        window_average_powerlaw(0.5, 5.0, 1.0)


@pytest.mark.parametrize("args", [(0.0, 1.0, 1.0), (0.5, -1.0, 1.0), (0.5, 1.0, 0.0)])
def test_window_average_rejects_bad_input(args):
    with pytest.raises(ParameterError):
        window_average_powerlaw(*args)
