"""q-order fluctuation moments, scaling fits and escort partition functions."""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.special import logsumexp

from .errors import DegenerateEnsembleError, FitError, ParameterError, SingularMomentError
from .profile import FluctuationTable

DEFAULT_FIT_RANGE = (24, 120)


def make_q_grid(q_min: float = -10.0, q_max: float = 10.0, step: float = 0.1) -> np.ndarray:
    """Uniform grid with both endpoints; values rounded so that 0 and 1 are exact."""
    if step <= 0 or q_max <= q_min:
        raise ParameterError("need q_max > q_min and a positive step")
    n = int(round((q_max - q_min) / step)) + 1
    return np.round(q_min + step * np.arange(n), 12)


def log_moments(F2: np.ndarray, q_grid) -> np.ndarray:
    """``ln F_q(s)`` for every q (rows) and scale (columns) of ``F2[scale, day]``.

    Computed in log space; ``q = 0`` uses the geometric-mean limit.
    """
    F2 = np.atleast_2d(np.asarray(F2, dtype=float))
    q = np.atleast_1d(np.asarray(q_grid, dtype=float))
    n_days = F2.shape[1]
    with np.errstate(divide="ignore"):
        logF2 = np.log(F2)
    if np.any(q <= 0) and np.any(F2 <= 0):
        day = int(np.argwhere(F2 <= 0)[0][1])
        raise SingularMomentError(f"F^2 vanishes for day {day}; moments of order q <= 0 diverge",
                                  day=day)
    out = np.empty((q.size, F2.shape[0]))
    nonzero = q != 0
    qn = q[nonzero]
    # sum over days of (F^2)^{q/2}, reduced in fixed day order
    lse = logsumexp(0.5 * qn[:, None, None] * logF2[None, :, :], axis=2)
    out[nonzero] = (lse - np.log(n_days)) / qn[:, None]
    if np.any(~nonzero):
        out[~nonzero] = 0.5 * np.mean(logF2, axis=1)
    return out


@dataclass
class MomentCurve:
    q: float
    scales: np.ndarray
    values: np.ndarray

    @property
    def log_values(self) -> np.ndarray:
        return np.log(self.values)


def moment_curve(table: FluctuationTable, q: float, scales=None) -> MomentCurve:
    """``F_q(s) = (N_d^{-1} sum_nu F^2(nu, s)^{q/2})^{1/q}`` over the table's scales."""
    if scales is None:
        idx = np.arange(table.scales.size)
    else:
        idx = np.array([np.flatnonzero(table.scales == s)[0] for s in scales])
    logF = log_moments(table.F2[idx], [q])[0]
    return MomentCurve(q=float(q), scales=table.scales[idx].copy(), values=np.exp(logF))


def _fit_mask(scales, fit_range):
    lo, hi = fit_range
    mask = (scales >= lo) & (scales <= hi)
    if np.count_nonzero(mask) < 3:
        raise FitError(f"fit range {fit_range} holds {np.count_nonzero(mask)} scales; need >= 3")
    return mask


def loglog_fit(log_s: np.ndarray, log_F: np.ndarray):
    """Row-wise OLS of ``log_F[k, :]`` on ``log_s``.

    Returns slope, intercept, slope standard error and chi^2/dof (unit weights).
    """
    x = np.asarray(log_s, dtype=float)
    Y = np.atleast_2d(log_F)
    n = x.size
    xm = x.mean()
    sxx = np.sum((x - xm) ** 2)
    slope = (Y - Y.mean(axis=1, keepdims=True)) @ (x - xm) / sxx
    intercept = Y.mean(axis=1) - slope * xm
    resid = Y - (intercept[:, None] + slope[:, None] * x[None, :])
    dof = max(n - 2, 1)
    chi2 = np.sum(resid**2, axis=1) / dof
    return slope, intercept, np.sqrt(chi2 / sxx), chi2


@dataclass
class ScalingResult:
    q: np.ndarray
    h: np.ndarray
    h_err: np.ndarray
    B: np.ndarray
    B_err: np.ndarray
    chi2_per_dof: np.ndarray
    fit_range: tuple
    scales_used: np.ndarray
    n_days: int
    h_boot_err: np.ndarray | None = None
    h_boot: np.ndarray | None = field(default=None, repr=False)

    @property
    def spread(self) -> np.ndarray:
        """``h(-q) - h(q)``; NaN where ``-q`` is not on the grid."""
        return spread(self.q, self.h)

    @property
    def A_rel(self) -> np.ndarray:
        """``A_q / A_1^q`` with ``A_q = exp(q B(q))``."""
        B1 = np.interp(1.0, self.q, self.B)
        return np.exp(self.q * (self.B - B1))


def spread(q, h) -> np.ndarray:
    q = np.asarray(q)
    h = np.asarray(h)
    if np.allclose(q, -q[::-1], atol=1e-9):
        return h[::-1] - h
    lookup = {round(float(v), 9): float(x) for v, x in zip(q, h)}
    return np.array([lookup.get(round(-float(v), 9), np.nan) - x for v, x in zip(q, h)])


def fit_scaling(curves, fit_range=DEFAULT_FIT_RANGE) -> ScalingResult:
    """Fit ``ln F_q(s) = h(q) ln s + B(q)`` over ``fit_range`` for a list of moment curves."""
    curves = sorted(curves, key=lambda c: c.q)
    scales = curves[0].scales
    for c in curves:
        if not np.array_equal(c.scales, scales):
            raise ParameterError("all moment curves must share one scale grid")
    logF = np.vstack([c.log_values for c in curves])
    q = np.array([c.q for c in curves])
    return _fit_from_log_moments(q, scales, logF, fit_range, n_days=0)


def _fit_from_log_moments(q, scales, logF, fit_range, n_days):
    mask = _fit_mask(scales, fit_range)
    log_s = np.log(scales[mask].astype(float))
    slope, intercept, se, chi2 = loglog_fit(log_s, logF[:, mask])
    xm = log_s.mean()
    n = log_s.size
    sxx = np.sum((log_s - xm) ** 2)
    b_err = np.sqrt(chi2 * (1.0 / n + xm**2 / sxx))
    if not np.all(np.isfinite(slope)):
        raise FitError("non-finite generalized Hurst exponent")
    return ScalingResult(q=np.asarray(q, dtype=float), h=slope, h_err=se, B=intercept, B_err=b_err,
                         chi2_per_dof=chi2, fit_range=tuple(int(v) for v in fit_range),
                         scales_used=scales[mask].copy(), n_days=n_days)


def scaling_analysis(table: FluctuationTable, q_grid, fit_range=DEFAULT_FIT_RANGE,
                     bootstrap: int = 0, seed: int | None = 0) -> ScalingResult:
    """Moments, scaling fit and (optionally) a day-level bootstrap of ``h(q)``.

    The bootstrap resamples days with replacement ``bootstrap`` times using a
    PCG64 stream seeded with ``seed``.
    """
    q = np.asarray(q_grid, dtype=float)
    mask = _fit_mask(table.scales, fit_range)
    F2 = table.F2
    result = _fit_from_log_moments(q, table.scales, log_moments(F2, q), fit_range, table.n_days)
    if bootstrap:
        rng = np.random.Generator(np.random.PCG64(seed))
        log_s = np.log(table.scales[mask].astype(float))
        sub = F2[mask]
        samples = np.empty((bootstrap, q.size))
        for b in range(bootstrap):
            idx = rng.integers(0, table.n_days, table.n_days)
            samples[b] = loglog_fit(log_s, log_moments(sub[:, idx], q))[0]
        result.h_boot = samples
        result.h_boot_err = samples.std(axis=0, ddof=1)
    return result


def scan_fit_windows(table: FluctuationTable, q_grid, lows, highs) -> list[dict]:
    """chi^2/dof of the scaling fit for candidate windows (diagnostic only)."""
    logF = log_moments(table.F2, q_grid)
    out = []
    for lo in lows:
        for hi in highs:
            mask = (table.scales >= lo) & (table.scales <= hi)
            if np.count_nonzero(mask) < 3:
                continue
            chi2 = loglog_fit(np.log(table.scales[mask].astype(float)), logF[:, mask])[3]
            out.append({"s_lo": int(lo), "s_hi": int(hi), "n_scales": int(mask.sum()),
                        "mean_chi2_per_dof": float(chi2.mean()), "max_chi2_per_dof": float(chi2.max())})
    return sorted(out, key=lambda r: r["mean_chi2_per_dof"])


@dataclass
class EscortDistribution:
    scale_s: int
    p: np.ndarray
    norm: float

    @property
    def n_days(self) -> int:
        return self.p.size


def escort_distribution(table: FluctuationTable | np.ndarray, scale_s: int | None = None) -> EscortDistribution:
    """``p(nu, s) = F(nu, s) / sum_nu F(nu, s)`` with ``F = sqrt(F^2)``."""
    F2 = table.row(scale_s) if isinstance(table, FluctuationTable) else np.asarray(table, float)
    if np.any(F2 < 0):
        raise ParameterError("F^2 must be non-negative")
    F = np.sqrt(F2)
    norm = float(np.sum(F))
    if norm == 0:
        raise DegenerateEnsembleError(f"all fluctuations vanish at scale {scale_s}")
    return EscortDistribution(scale_s=scale_s if scale_s is not None else -1, p=F / norm, norm=norm)


def partition_function(escort: EscortDistribution, q: float) -> float:
    """``Z_q(s) = sum_nu p(nu, s)^q``; exactly ``N_d`` at ``q = 0``."""
    p = escort.p
    if q == 0:
        return float(p.size)
    if q < 0 and np.any(p == 0):
        raise SingularMomentError("zero escort probability with negative q",
                                  day=int(np.flatnonzero(p == 0)[0]))
    return float(np.sum(p**q))
