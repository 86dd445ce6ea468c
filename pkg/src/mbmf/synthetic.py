"""Synthetic inputs with known answers: correlated noise, mean-wait grids,
multi-branched exponent models and power-law fluctuation tables."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from numpy.polynomial import Polynomial

from .errors import ParameterError
from .ingest import Calendar, EventSeries, MeanWaitGrid, events_from_trading_time
from .profile import FluctuationTable
from .surrogates import day_streams, rng_info


def fgn_autocovariance(H: float, n: int) -> np.ndarray:
    k = np.arange(n, dtype=float)
    return 0.5 * (np.abs(k + 1) ** (2 * H) - 2 * k ** (2 * H) + np.abs(k - 1) ** (2 * H))


def fgn(n: int, H: float, rng: np.random.Generator, size: int | None = None) -> np.ndarray:
    """Unit-variance fractional Gaussian noise by circulant embedding.

    Returns ``size`` independent rows of length ``n`` (one row when ``size`` is None).
    """
    if not 0 < H < 1:
        raise ParameterError("Hurst exponent must lie in (0, 1)")
    if n < 2:
        raise ParameterError("need n >= 2")
    gamma = fgn_autocovariance(H, n + 1)
    row = np.concatenate([gamma, gamma[-2:0:-1]])
    lam = np.fft.fft(row).real
    if lam.min() < -1e-10 * lam.max():
        raise ParameterError("circulant embedding is not non-negative definite")
    lam = np.clip(lam, 0.0, None)
    m = row.size
    rows = 1 if size is None else int(size)
    z = rng.standard_normal((rows, m)) + 1j * rng.standard_normal((rows, m))
    w = np.fft.fft(np.sqrt(lam / m) * z, axis=1)
    out = w.real[:, :n]
    return out[0] if size is None else out


def fgn_mean_wait_grid(n_days: int, scale_s: int, H: float, seed: int, mean: float = 15.0,
                       rel_sigma: float = 0.1, session_duration_s: int = 28200) -> MeanWaitGrid:
    """Mean-wait grid whose in-day sequences are ``mean * (1 + rel_sigma * fGn)``.

    The day profiles are then fractional Brownian paths with Hurst exponent
    ``H``, so the fluctuation moments scale with ``h(q) = H``.
    """
    if session_duration_s % scale_s:
        raise ParameterError("scale must divide the session duration")
    rng = np.random.Generator(np.random.PCG64(np.random.SeedSequence([int(seed), int(scale_s)])))
    noise = fgn(scale_s, H, rng, size=n_days)
    means = mean * (1.0 + rel_sigma * noise)
    if np.any(means <= 0):
        raise ParameterError("rel_sigma too large: non-positive mean waits")
    return MeanWaitGrid(scale_s=int(scale_s), delta=session_duration_s // int(scale_s), means=means,
                        counts=np.ones(means.shape, dtype=np.int64))


def lrc_lognormal_waits(n: int, H: float, seed: int, mean: float = 15.0,
                        sigma: float = 1.0, max_wait: float | None = None) -> np.ndarray:
    """Long-range-correlated waits ``exp(sigma * fGn_H)`` rescaled to ``mean``.

    ``max_wait`` clips the rare extreme waits; a cap below the window width
    guarantees that no window of that width is empty.
    """
    rng = np.random.Generator(np.random.PCG64(int(seed)))
    w = np.exp(sigma * fgn(n, H, rng))
    w *= mean / w.mean()
    return w if max_wait is None else np.minimum(w, max_wait)


def events_from_waits(waits, n_days: int, calendar: Calendar | None = None) -> EventSeries:
    """Lay consecutive waits out in trading time, truncated to ``n_days`` sessions."""
    calendar = calendar or Calendar()
    T = float(calendar.session_duration_s)
    tt = np.cumsum(np.asarray(waits, dtype=float))
    tt = tt[tt < n_days * T]
    return events_from_trading_time(tt, calendar, n_days=n_days)


def lrc_event_series(n_days: int, H: float, seed: int, mean: float = 15.0, sigma: float = 1.0,
                     max_wait: float | None = None, calendar: Calendar | None = None) -> EventSeries:
    """Event series driven by long-range-correlated lognormal waits."""
    calendar = calendar or Calendar()
    n = int(n_days * calendar.session_duration_s / mean * 1.2) + 64
    waits = lrc_lognormal_waits(n, H, seed, mean, sigma, max_wait)
    events = events_from_waits(waits, n_days, calendar)
    events.meta = rng_info(seed, kind="lrc_lognormal", H=H, sigma=sigma, mean=mean,
                           max_wait=max_wait)
    return events


@dataclass(frozen=True)
class ThreeExtremaModel:
    """Polynomial exponent model whose Hölder exponent has three extrema.

    ``dalpha/dq = k (q - q_b)(q - q_a)(q - q_c)(1 + eps q)`` with
    ``q_b < q_a < q_c``; alpha has minima at ``q_b``, ``q_c`` and a maximum at
    ``q_a``.  ``tau`` integrates alpha with ``tau(1) = 0`` and
    ``h = (tau - tau(0)) / q`` is a degree-5 polynomial.
    """

    q_b: float = -1.5
    q_a: float = 0.2
    q_c: float = 2.5
    k: float = 0.05
    eps: float = 0.05
    alpha0: float = 1.0

    def __post_init__(self):
        if not self.q_b < self.q_a < self.q_c:
            raise ParameterError("need q_b < q_a < q_c")

    @property
    def dalpha(self) -> Polynomial:
        return self.k * Polynomial.fromroots([self.q_b, self.q_a, self.q_c]) * Polynomial([1.0, self.eps])

    @property
    def alpha_poly(self) -> Polynomial:
        return self.dalpha.integ(k=self.alpha0)

    @property
    def tau_poly(self) -> Polynomial:
        t = self.alpha_poly.integ()
        return t - t(1.0)

    @property
    def h_poly(self) -> Polynomial:
        t = self.tau_poly
        quotient, _ = divmod(t - t(0.0), Polynomial([0.0, 1.0]))
        return quotient

    def h(self, q):
        return self.h_poly(np.asarray(q, dtype=float))

    def alpha(self, q):
        return self.alpha_poly(np.asarray(q, dtype=float))

    def tau(self, q):
        return self.tau_poly(np.asarray(q, dtype=float))

    def f(self, q):
        q = np.asarray(q, dtype=float)
        return q * self.alpha(q) - self.tau(q)


def powerlaw_table(scales, exponents, weights) -> FluctuationTable:
    """``F(nu, s) = w_nu * s**H_nu``; the moments of such a table are known exactly."""
    s = np.asarray(scales, dtype=float)
    H = np.asarray(exponents, dtype=float)
    w = np.asarray(weights, dtype=float)
    F = w[None, :] * s[:, None] ** H[None, :]
    return FluctuationTable(scales=np.asarray(scales, dtype=int), F2=F**2)


def fgn_table_grids(n_days: int, scales, H: float, seed: int, **kwargs) -> list[MeanWaitGrid]:
    return [fgn_mean_wait_grid(n_days, s, H, seed, **kwargs) for s in scales]


__all__ = [
    "ThreeExtremaModel", "day_streams", "events_from_waits", "fgn", "fgn_autocovariance",
    "fgn_mean_wait_grid", "fgn_table_grids", "lrc_event_series", "lrc_lognormal_waits",
    "powerlaw_table",
]
