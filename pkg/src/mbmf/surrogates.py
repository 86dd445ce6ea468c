"""Reference series: Poisson event streams and shuffled inter-event times.

Randomness comes from numpy's PCG64 bit generator.  A root
``SeedSequence(seed)`` spawns one child stream per day, so every day's draw
depends only on the seed and the day number.
"""
from __future__ import annotations

import numpy as np

from .errors import EmptyDataError, ParameterError
from .ingest import Calendar, EventSeries, MeanWaitGrid, events_from_trading_time

RNG_ALGORITHM = "PCG64"


def rng_info(seed: int, **extra) -> dict:
    return {"rng": RNG_ALGORITHM, "seed": int(seed), **extra}


def day_streams(seed: int, n_days: int) -> list[np.random.Generator]:
    """Independent per-day generators derived from one 64-bit seed."""
    children = np.random.SeedSequence(int(seed)).spawn(n_days)
    return [np.random.Generator(np.random.PCG64(c)) for c in children]


def _rates_from_template(template, n_days):
    if isinstance(template, MeanWaitGrid):
        T = template.session_duration_s
        return template.counts.sum(axis=1) / float(T), template.n_days
    if isinstance(template, EventSeries):
        T = template.calendar.session_duration_s
        counts = np.bincount(template.day_index, minlength=template.n_days)
        return counts / float(T), template.n_days
    rates = np.atleast_1d(np.asarray(template, dtype=float))
    if rates.size == 1:
        if n_days is None:
            raise ParameterError("a single rate needs n_days")
        rates = np.full(int(n_days), rates[0])
    return rates, rates.size


def poisson_surrogate(template, seed: int, *, n_days: int | None = None,
                      calendar: Calendar | None = None, per_day: bool = True) -> EventSeries:
    """Homogeneous Poisson events, one independent process per session.

    Parameters
    ----------
    template : MeanWaitGrid, EventSeries, float or array
        Source of the rates (events per second).  Grids and event series give
        one empirical rate per day (``per_day=True``) or their overall rate.
    seed : int
        Seed of the PCG64 streams.
    n_days : int, optional
        Number of sessions when ``template`` is a single rate.
    calendar : Calendar, optional
        Session layout; defaults to the standard calendar with the template's
        session length.

    Returns
    -------
    EventSeries
        Waits are exponential; each day's process is cut at the session end,
        so the series spans exactly ``N_d`` sessions.
    """
    rates, n = _rates_from_template(template, n_days)
    if n_days is not None and n_days != n and rates.size != 1:
        rates = rates[:n_days] if n_days < n else np.resize(rates, n_days)
        n = rates.size
    if not per_day:
        rates = np.full(n, rates.mean())
    if not np.all(np.isfinite(rates)) or np.any(rates <= 0):
        raise ParameterError("Poisson rates must be positive and finite")
    if calendar is None:
        T = template.session_duration_s if isinstance(template, MeanWaitGrid) else (
            template.calendar.session_duration_s if isinstance(template, EventSeries) else 28200)
        calendar = Calendar(session_duration_s=T)
    T = float(calendar.session_duration_s)
    times = []
    for day, (lam, rng) in enumerate(zip(rates, day_streams(seed, n))):
        # draw exponential waits in blocks until the session is covered
        block = max(16, int(lam * T * 1.2) + 16)
        t = np.cumsum(rng.exponential(1.0 / lam, block))
        while t[-1] < T:
            t = np.concatenate([t, t[-1] + np.cumsum(rng.exponential(1.0 / lam, block))])
        times.append(day * T + t[t < T])
    tt = np.concatenate(times)
    if tt.size == 0:
        raise EmptyDataError("Poisson surrogate produced no events")
    events = events_from_trading_time(tt, calendar, n_days=n)
    events.meta = rng_info(seed, kind="poisson", per_day=bool(per_day),
                           mean_rate=float(rates.mean()))
    return events


def shuffle_surrogate(waits, seed: int, passes: int = 10) -> np.ndarray:
    """Randomly permute inter-event times (``passes`` Fisher-Yates passes).

    The multiset of values is preserved exactly; only the order changes.
    """
    w = np.array(waits, dtype=float, copy=True)
    if w.size == 0:
        raise EmptyDataError("cannot shuffle an empty series")
    if int(passes) < 1:
        raise ParameterError("passes must be >= 1")
    rng = np.random.Generator(np.random.PCG64(int(seed)))
    for _ in range(int(passes)):
        rng.shuffle(w)
    return w


def shuffle_events(events: EventSeries, seed: int, passes: int = 10) -> EventSeries:
    """Event series whose trading-time waits are a shuffle of the original ones.

    The first event and the total span are kept, so the reshuffled waits
    tile the same trading-time interval.
    """
    tt = events.trading_time
    waits = shuffle_surrogate(np.diff(tt), seed, passes) if tt.size > 1 else np.array([])
    new_tt = tt[0] + np.concatenate([[0.0], np.cumsum(waits)])
    # cumulative rounding must not push the last event past the final session
    new_tt = np.minimum(new_tt, np.nextafter(events.total_duration, 0))
    out = events_from_trading_time(new_tt, events.calendar, session_days=events.session_days)
    out.meta = rng_info(seed, kind="shuffle", passes=int(passes))
    return out
