"""Closed-form cubic multifractal model.

The Rényi exponent of the model is a cubic ``tau(q) = -a q**3 + c q``,
shifted by ``a - c`` so that ``tau(1) = 0``.  Every downstream quantity
(generalized Hurst exponent, Rényi dimensions, Hölder exponent, the
two-branched spectrum and the specific heat) has a closed form, which makes
the model the reference against which the numerical pipeline is checked.
"""
from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np

from .errors import DomainError, ParameterError


@dataclass(frozen=True)
class CubicModel:
    a: float = 1.0
    c: float = 4.0

    def __post_init__(self):
        if not self.a > 0:
            raise ParameterError(f"cubic model needs a > 0, got a={self.a}")

    @property
    def contact_value(self) -> float:
        """``f = alpha = D(1) = c - 3a`` at the contact point."""
        return self.c - 3.0 * self.a

    def h(self, q):
        """Generalized Hurst exponent, ``-a q^2 + c``."""
        q = np.asarray(q, dtype=float)
        return -self.a * q**2 + self.c


@dataclass(frozen=True)
class CubicPoint:
    q: np.ndarray | float
    h: np.ndarray | float
    tau: np.ndarray | float
    D: np.ndarray | float
    alpha: np.ndarray | float
    f: np.ndarray | float
    c_heat: np.ndarray | float
    h_rel: np.ndarray | float
    tau_rel: np.ndarray | float
    D_rel: np.ndarray | float

    def as_dict(self) -> dict:
        return {k: getattr(self, k) for k in self.__dataclass_fields__}


def _squeeze(x):
    x = np.asarray(x, dtype=float)
    return float(x) if x.ndim == 0 else x


def cubic_eval(model: CubicModel, q, shifted: bool = True) -> CubicPoint:
    """Evaluate every closed-form quantity of ``model`` at ``q``.

    With ``shifted=False`` the raw cubic ``tau = -a q^3 + c q`` and the
    unshifted spectrum are returned; ``D`` and the relative quantities are
    always those of the shifted (contact-anchored) model.
    """
    a, c = model.a, model.c
    q = np.asarray(q, dtype=float)
    h = -a * q**2 + c
    shift = (a - c) if shifted else 0.0
    tau = -a * q**3 + c * q + shift
    # D(q) = -a (q^3 - 1)/(q - 1) + c = -a (q^2 + q + 1) + c, finite at q = 1
    D = -a * (q**2 + q + 1.0) + c
    alpha = -3.0 * a * q**2 + c
    # f(alpha) = -sign(q) 2a ((c - alpha)/(3a))^{3/2}, branch picked by the sign of q
    radicand = np.clip((c - alpha) / (3.0 * a), 0.0, None)
    f = -np.sign(q) * 2.0 * a * radicand**1.5 - shift
    c_heat = 6.0 * a * q**3
    h_rel = -a * (q**2 - 1.0)
    tau_rel = q * h_rel
    D_rel = -a * q * (q + 1.0)
    return CubicPoint(
        q=_squeeze(q), h=_squeeze(h), tau=_squeeze(tau), D=_squeeze(D),
        alpha=_squeeze(alpha), f=_squeeze(f), c_heat=_squeeze(c_heat),
        h_rel=_squeeze(h_rel), tau_rel=_squeeze(tau_rel), D_rel=_squeeze(D_rel),
    )


def q_of_alpha(model: CubicModel, alpha):
    """Return the two slopes ``(q_minus, q_plus) = (-r, +r)`` supporting ``alpha``.

    ``r = sqrt((c - alpha) / (3a))`` exists only for ``alpha <= c``.
    """
    alpha = np.asarray(alpha, dtype=float)
    if np.any(alpha > model.c):
        raise DomainError(f"alpha must not exceed c={model.c}")
    r = np.sqrt((model.c - alpha) / (3.0 * model.a))
    return _squeeze(-r), _squeeze(r)


def spectrum_of_alpha(model: CubicModel, alpha, shifted: bool = True):
    """Both branches of ``f(alpha)``; returns ``(f_q_negative, f_q_positive)``."""
    q_minus, q_plus = q_of_alpha(model, alpha)
    shift = (model.c - model.a) if shifted else 0.0
    amp = 2.0 * model.a * ((model.c - np.asarray(alpha, dtype=float)) / (3.0 * model.a)) ** 1.5
    return _squeeze(amp + shift), _squeeze(-amp + shift)


def d2f_dalpha2(model: CubicModel, q):
    """``d^2 f / d alpha^2 = dq/d alpha = -1 / (6 a q)`` along the branch of ``q``."""
    q = np.asarray(q, dtype=float)
    with np.errstate(divide="ignore"):
        return _squeeze(-1.0 / (6.0 * model.a * q))


@dataclass(frozen=True)
class WindowAverage:
    averaged: float
    pointwise: float
    relative_deviation: float


def window_average_powerlaw(exponent: float, x, delta: float) -> WindowAverage:
    """Average ``y**-(1 + exponent)`` over ``[x, x + delta]`` in closed form."""
    if not exponent > 0:
        raise ParameterError("exponent must be positive")
    if not delta > 0:
        raise ParameterError("delta must be positive")
    x = np.asarray(x, dtype=float)
    if np.any(x <= 0):
        raise ParameterError("x must be positive")
    if np.any(delta / x > 0.1):
        warnings.warn("window width is not small compared to x; averaging bends the power law",
                      stacklevel=2)
    averaged = (x**-exponent - (x + delta) ** -exponent) / (exponent * delta)
    pointwise = x ** -(1.0 + exponent)
    return WindowAverage(
        averaged=_squeeze(averaged),
        pointwise=_squeeze(pointwise),
        relative_deviation=_squeeze((averaged - pointwise) / pointwise),
    )


def oracle_table(model: CubicModel, q_grid) -> dict[str, np.ndarray]:
    """Column table of the closed forms over ``q_grid`` (for export and plotting)."""
    return cubic_eval(model, np.asarray(q_grid, dtype=float)).as_dict()
