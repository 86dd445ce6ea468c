"""Day profiles, per-day polynomial detrending and intraday fluctuation functions."""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from numpy.polynomial import Polynomial
from scipy.optimize import least_squares

from .errors import FitError, ParameterError
from .ingest import MeanWaitGrid

DEFAULT_DEGREE = 3


@dataclass
class DayProfile:
    day: int
    values: np.ndarray


@dataclass
class DetrendedDay:
    day: int
    coefficients: np.ndarray  # highest power first: y(i) = sum_m A[m] * i**(M - m)
    deviations: np.ndarray
    trend: np.ndarray

    @property
    def degree(self) -> int:
        return len(self.coefficients) - 1


def day_profile(grid: MeanWaitGrid, day: int) -> DayProfile:
    """Cumulative mean waits of one (zero-based) day, ``U(i) = sum_{i' <= i} mean_{i'}``."""
    if not 0 <= day < grid.n_days:
        raise ParameterError(f"day {day} out of range [0, {grid.n_days})")
    return DayProfile(day=day, values=np.cumsum(grid.means[day]))


def day_profiles(grid: MeanWaitGrid) -> np.ndarray:
    """All single-day profiles as an ``(N_d, s)`` array."""
    return np.cumsum(grid.means, axis=1)


def multi_day_profile(grid: MeanWaitGrid) -> np.ndarray:
    """Multi-day profile ``Y`` of length ``N_d * s``; ``U_nu`` is its in-day increment."""
    return np.cumsum(grid.means.ravel())


def _design(s: int, degree: int):
    if degree < 0:
        raise ParameterError("polynomial degree must be non-negative")
    if s < degree + 2:
        raise FitError(f"s={s} windows cannot support a degree-{degree} detrending fit "
                       f"(need s >= {degree + 2})")
    i = np.arange(1, s + 1, dtype=float)
    # centre and scale the window index so the Vandermonde columns stay well conditioned
    u = (i - 0.5 * (s + 1)) / (0.5 * (s - 1))
    V = np.vander(u, degree + 1, increasing=True)
    Q, R = np.linalg.qr(V)
    if np.min(np.abs(np.diag(R))) < 1e-12 * np.max(np.abs(np.diag(R))):
        raise FitError(f"rank-deficient detrending design at s={s}, degree={degree}")
    return Q, R


def detrend_profiles(profiles: np.ndarray, degree: int = DEFAULT_DEGREE):
    """Least-squares polynomial trends for every row of ``profiles``.

    Returns ``(trend, deviations)`` where ``deviations = |U - y|``.
    """
    profiles = np.atleast_2d(np.asarray(profiles, dtype=float))
    Q, _ = _design(profiles.shape[1], degree)
    trend = (profiles @ Q) @ Q.T
    return trend, np.abs(profiles - trend)


def detrend(profile: DayProfile, degree: int = DEFAULT_DEGREE) -> DetrendedDay:
    U = np.asarray(profile.values, dtype=float)
    s = U.size
    Q, R = _design(s, degree)
    scaled = np.linalg.solve(R, Q.T @ U)
    trend = Q @ (Q.T @ U)
    poly = Polynomial(scaled, domain=[1, s]).convert()
    coef = np.zeros(degree + 1)
    coef[: poly.coef.size] = poly.coef
    return DetrendedDay(day=profile.day, coefficients=coef[::-1].copy(),
                        deviations=np.abs(U - trend), trend=trend)


def fluctuation(detrended: DetrendedDay | np.ndarray, lag: int = 0) -> float:
    """Intraday autocorrelation of absolute deviations at ``lag``; lag 0 gives ``F^2``."""
    d = detrended.deviations if isinstance(detrended, DetrendedDay) else np.asarray(detrended, float)
    s = d.size
    if not 0 <= lag < s:
        raise ParameterError(f"lag {lag} outside [0, {s - 1}]")
    return float(np.mean(d[: s - lag] * d[lag:]))


def autocorrelation(deviations: np.ndarray, max_lag: int | None = None) -> np.ndarray:
    """``F^2(j)`` for ``j = 0..max_lag`` for each row of ``deviations``."""
    d = np.atleast_2d(np.asarray(deviations, dtype=float))
    s = d.shape[1]
    max_lag = s - 1 if max_lag is None else min(max_lag, s - 1)
    out = np.empty((d.shape[0], max_lag + 1))
    for j in range(max_lag + 1):
        out[:, j] = np.mean(d[:, : s - j] * d[:, j:], axis=1)
    return out


@dataclass
class FluctuationTable:
    """``F^2(nu, s)`` over days and scales, optionally with lagged values.

    ``F2[k, nu]`` belongs to ``scales[k]``; ``lagged[s]`` is an ``(N_d, s)``
    array of ``F^2(j; nu, s)`` and ``abs_dev_mean[s]`` the grand mean of
    ``|U - y|`` at that scale.
    """

    scales: np.ndarray
    F2: np.ndarray
    lagged: dict = field(default_factory=dict)
    abs_dev_mean: dict = field(default_factory=dict)

    @property
    def n_days(self) -> int:
        return self.F2.shape[1]

    def row(self, scale_s: int) -> np.ndarray:
        idx = np.flatnonzero(self.scales == scale_s)
        if idx.size == 0:
            raise ParameterError(f"scale {scale_s} not in table")
        return self.F2[idx[0]]

    def select_days(self, days) -> "FluctuationTable":
        return FluctuationTable(scales=self.scales, F2=self.F2[:, days])


def fluctuation_row(grid: MeanWaitGrid, degree: int = DEFAULT_DEGREE, lags: bool = False):
    """``F^2(nu, s)`` of every day at the grid's scale (plus lagged values on request)."""
    _, dev = detrend_profiles(day_profiles(grid), degree)
    F2 = np.mean(dev**2, axis=1)
    lagged = autocorrelation(dev) if lags else None
    return F2, lagged, float(dev.mean())


def fluctuation_table(grids, degree: int = DEFAULT_DEGREE, lags=()) -> FluctuationTable:
    """Assemble a table from mean-wait grids at several scales.

    ``lags`` lists the scales for which the full lag structure is kept.
    """
    grids = sorted(grids, key=lambda g: g.scale_s)
    rows, lagged, absdev = [], {}, {}
    for g in grids:
        F2, lag_rows, mean_abs = fluctuation_row(g, degree, lags=g.scale_s in set(lags))
        rows.append(F2)
        absdev[g.scale_s] = mean_abs
        if lag_rows is not None:
            lagged[g.scale_s] = lag_rows
    return FluctuationTable(scales=np.array([g.scale_s for g in grids]), F2=np.vstack(rows),
                            lagged=lagged, abs_dev_mean=absdev)


@dataclass
class AutocorrelationCurve:
    scale_s: int
    lags: np.ndarray
    values: np.ndarray
    mean_sq_dev: float
    sq_mean_abs_dev: float


def ensemble_autocorrelation(table: FluctuationTable, scale_s: int) -> AutocorrelationCurve:
    """Day-averaged ``<F^2(j; s)>`` with the two reference levels.

    ``mean_sq_dev`` is ``<(U - y)^2>`` (equal to the lag-0 value) and
    ``sq_mean_abs_dev`` is ``<|U - y|>^2``, the level of decorrelated deviations.
    """
    if scale_s not in table.lagged:
        raise ParameterError(f"no lagged values stored for scale {scale_s}")
    lagged = table.lagged[scale_s]
    # fixed day order keeps the reduction bit-reproducible
    values = np.mean(lagged, axis=0)
    mean_abs = table.abs_dev_mean.get(scale_s, np.nan)
    return AutocorrelationCurve(scale_s=scale_s, lags=np.arange(lagged.shape[1]), values=values,
                                mean_sq_dev=float(values[0]), sq_mean_abs_dev=float(mean_abs**2))


@dataclass
class DecayFit:
    model: str
    params: dict
    errors: dict
    chi2_per_dof: float
    n_iter: int = 0

    def predict(self, j):
        j = np.asarray(j, dtype=float)
        p = self.params
        if self.model == "exponential":
            return p["A"] * np.exp(-p["a"] * j) + p["const"]
        return p["A"] / (p["a"] + j) ** p["alpha"] + p["const"]


def _initial_guess(j, y, model):
    span = np.ptp(y)
    C0 = y.min() - 0.05 * span
    resid = y - C0
    if span <= 1e-12 * max(1.0, abs(y.mean())):
        return (0.0, 0.0, float(y.mean())) if model == "exponential" else (0.0, 0.0, 1.0, float(y.mean()))
    mask = resid > 0
    x = j[mask] if model == "exponential" else np.log1p(j[mask])
    slope, intercept = np.polyfit(x, np.log(resid[mask]), 1)
    rate = max(-slope, 1e-3)
    if model == "exponential":
        return float(np.exp(intercept)), rate, float(C0)
    # power law with unit shift; the shift is fitted on a log scale
    return float(np.exp(intercept)), 0.0, rate, float(C0)


def fit_decay(curve, model: str = "exponential", lags=None, max_iter: int = 200,
              rtol: float = 1e-10) -> DecayFit:
    """Fit a shifted exponential ``A exp(-a j) + const`` or shifted power law
    ``A / (a + j)**alpha + const`` by Levenberg-Marquardt.

    ``curve`` is an :class:`AutocorrelationCurve` or a plain array indexed by lag.
    Standard errors come from the Jacobian at the optimum scaled by chi^2/dof.
    """
    if isinstance(curve, AutocorrelationCurve):
        j, y = curve.lags.astype(float), curve.values
    else:
        y = np.asarray(curve, dtype=float)
        j = np.arange(y.size, dtype=float) if lags is None else np.asarray(lags, dtype=float)
    if y.size < 5:
        raise FitError("need at least 5 points to fit a decay")
    if model not in ("exponential", "power"):
        raise ParameterError(f"unknown decay model {model!r}")

    if model == "exponential":
        def fun(p):
            return p[0] * np.exp(-p[1] * j) + p[2] - y

        def jac(p):
            e = np.exp(-p[1] * j)
            return np.column_stack([e, -p[0] * j * e, np.ones_like(j)])
    else:
        def fun(p):
            return p[0] * (np.exp(p[1]) + j) ** -p[2] + p[3] - y

        def jac(p):
            a = np.exp(p[1])
            base = a + j
            g = base ** -p[2]
            return np.column_stack([g, -p[0] * p[2] * g / base * a, -p[0] * g * np.log(base),
                                    np.ones_like(j)])

    p0 = np.asarray(_initial_guess(j, y, model), dtype=float)
    n_par = p0.size
    with np.errstate(over="ignore", invalid="ignore"):
        sol = least_squares(fun, p0, jac=jac, method="lm", xtol=rtol, ftol=rtol,
                            max_nfev=max_iter * (n_par + 1))
    resid_norm = float(np.linalg.norm(sol.fun)) if np.all(np.isfinite(sol.fun)) else float("inf")
    if sol.status <= 0 or not np.all(np.isfinite(sol.x)):
        raise FitError(f"{model} decay fit did not converge ({sol.message})", residual_norm=resid_norm)
    dof = max(y.size - n_par, 1)
    chi2 = float(np.sum(sol.fun**2) / dof)
    J = sol.jac
    cov = np.linalg.pinv(J.T @ J) * chi2
    se = np.sqrt(np.clip(np.diag(cov), 0.0, None))
    p = sol.x
    if model == "exponential":
        params = {"A": p[0], "a": p[1], "const": p[2]}
        errors = {"A": se[0], "a": se[1], "const": se[2]}
    else:
        a = float(np.exp(p[1]))
        params = {"A": p[0], "a": a, "alpha": p[2], "const": p[3]}
        errors = {"A": se[0], "a": a * se[1], "alpha": se[2], "const": se[3]}
    return DecayFit(model=model, params={k: float(v) for k, v in params.items()},
                    errors={k: float(v) for k, v in errors.items()}, chi2_per_dof=chi2,
                    n_iter=int(sol.nfev))
