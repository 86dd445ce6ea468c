"""Event loading, session partitioning and per-window mean waiting times.

Timestamps are seconds on a continuous clock (e.g. Unix time).  A calendar
cuts the clock into trading sessions of fixed duration ``T`` that start at a
fixed offset into each day; closed time (nights, weekends) is removed, so
every retained event gets a *trading time* ``day * T + local_time``.  The
inter-event interval that straddles a closure is measured in trading time
and belongs to the window containing its left border.
"""
from __future__ import annotations

import csv
import io
import json
import logging
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import EmptyDataError, InputError, ParameterError, ScaleOutOfRangeError

log = logging.getLogger(__name__)

SECONDS_PER_DAY = 86400
# day number 4 since the Unix epoch is Monday 1970-01-05
FIRST_MONDAY = 4


@dataclass(frozen=True)
class Calendar:
    session_duration_s: int = 28200
    day_start_offset_s: int = 32400
    skip_weekends: bool = True

    def __post_init__(self):
        if int(self.session_duration_s) != self.session_duration_s or self.session_duration_s <= 0:
            raise ParameterError("session_duration_s must be a positive integer")
        if self.session_duration_s > SECONDS_PER_DAY:
            raise ParameterError("a session cannot last longer than a day")
        object.__setattr__(self, "session_duration_s", int(self.session_duration_s))
        object.__setattr__(self, "day_start_offset_s", int(self.day_start_offset_s))

    @classmethod
    def from_mapping(cls, mapping: dict) -> "Calendar":
        known = {"session_duration_s", "day_start_offset_s", "skip_weekends"}
        return cls(**{k: v for k, v in mapping.items() if k in known})

    def is_trading_day(self, day):
        day = np.asarray(day)
        if not self.skip_weekends:
            return np.ones(day.shape, dtype=bool)
        # 1970-01-01 (day 0) was a Thursday; Monday == 0
        return (day + 3) % 7 < 5

    def session_start(self, day):
        return np.asarray(day) * SECONDS_PER_DAY + self.day_start_offset_s

    def trading_days(self, n: int, first_day: int = FIRST_MONDAY) -> np.ndarray:
        """The first ``n`` trading day numbers on or after ``first_day``."""
        out = []
        day = first_day
        while len(out) < n:
            if self.is_trading_day(day):
                out.append(day)
            day += 1
        return np.asarray(out, dtype=np.int64)

    def as_dict(self) -> dict:
        return {
            "session_duration_s": self.session_duration_s,
            "day_start_offset_s": self.day_start_offset_s,
            "skip_weekends": self.skip_weekends,
        }


@dataclass
class EventSeries:
    """Ordered events restricted to trading sessions.

    ``day_index`` numbers the retained sessions 0..N_d-1 in calendar order,
    ``local_time`` is the offset from the session start and ``session_days``
    holds the calendar day number of every session.
    """

    timestamps: np.ndarray
    calendar: Calendar
    day_index: np.ndarray
    local_time: np.ndarray
    session_days: np.ndarray
    n_dropped: int = 0
    meta: dict = field(default_factory=dict)

    @property
    def n_days(self) -> int:
        return len(self.session_days)

    @property
    def n_events(self) -> int:
        return len(self.timestamps)

    @property
    def trading_time(self) -> np.ndarray:
        return self.day_index * float(self.calendar.session_duration_s) + self.local_time

    @property
    def total_duration(self) -> float:
        return float(self.n_days * self.calendar.session_duration_s)

    def waits(self, close_final: bool = True) -> np.ndarray:
        """Inter-event times in trading time (closed time removed)."""
        tt = self.trading_time
        w = np.diff(tt)
        if close_final:
            w = np.append(w, self.total_duration - tt[-1])
        return w


def _parse_float(text, line):
    try:
        value = float(text)
    except (TypeError, ValueError):
        raise InputError(f"cannot parse timestamp {text!r}", line=line) from None
    if not math.isfinite(value):
        raise InputError(f"non-finite timestamp {text!r}", line=line)
    return value


def _read_csv(text: str, column: str | None) -> list[float]:
    rows = list(csv.reader(io.StringIO(text)))
    values = []
    col = 0
    start = 0
    if rows and rows[0]:
        first = [cell.strip() for cell in rows[0]]
        try:
            float(first[0])
        except ValueError:
            # header row
            start = 1
            names = [name.lower() for name in first]
            wanted = [column] if column else ["t", "timestamp", "time"]
            for name in wanted:
                if name and name.lower() in names:
                    col = names.index(name.lower())
                    break
            else:
                if column:
                    raise InputError(f"column {column!r} not found in header", line=1)
    for lineno, row in enumerate(rows[start:], start=start + 1):
        if not row or all(not cell.strip() for cell in row):
            continue
        if col >= len(row):
            raise InputError("missing timestamp column", line=lineno)
        values.append(_parse_float(row[col].strip(), lineno))
    return values


def _read_jsonl(text: str, key: str) -> list[float]:
    values = []
    for lineno, line in enumerate(text.splitlines(), start=1):
        if not line.strip():
            continue
        try:
            record = json.loads(line)
        except json.JSONDecodeError as exc:
            raise InputError(f"invalid JSON ({exc.msg})", line=lineno) from None
        if isinstance(record, dict):
            if key not in record:
                raise InputError(f"record lacks field {key!r}", line=lineno)
            record = record[key]
        values.append(_parse_float(record, lineno))
    return values


def read_timestamps(source, column: str | None = None) -> np.ndarray:
    """Read raw timestamps from a CSV/JSONL path or an in-memory record list."""
    if isinstance(source, (str, Path)):
        path = Path(source)
        if not path.exists():
            raise InputError(f"input file not found: {path}")
        text = path.read_text()
        if path.suffix.lower() in (".jsonl", ".ndjson", ".json"):
            values = _read_jsonl(text, column or "t")
        else:
            values = _read_csv(text, column)
    else:
        values = []
        for lineno, record in enumerate(source, start=1):
            if isinstance(record, dict):
                record = record.get(column or "t")
            values.append(_parse_float(record, lineno))
    return np.asarray(values, dtype=float)


def events_from_timestamps(timestamps, calendar: Calendar, session_days=None) -> EventSeries:
    """Keep the events falling inside sessions, sorted, and index them by session.

    By default the sessions are the days that hold at least one event; pass
    ``session_days`` to fix them explicitly (days without events stay in).
    """
    ts = np.sort(np.asarray(timestamps, dtype=float), kind="stable")
    T = calendar.session_duration_s
    shifted = ts - calendar.day_start_offset_s
    day = np.floor(shifted / SECONDS_PER_DAY).astype(np.int64)
    local = shifted - day * SECONDS_PER_DAY
    keep = (local >= 0) & (local < T) & calendar.is_trading_day(day)
    n_dropped = int(np.count_nonzero(~keep))
    if n_dropped:
        log.info("dropped %d events outside trading sessions", n_dropped)
    ts, day, local = ts[keep], day[keep], local[keep]
    if ts.size == 0:
        raise EmptyDataError("no events fall inside a trading session")
    if session_days is None:
        session_days, day_index = np.unique(day, return_inverse=True)
    else:
        session_days = np.asarray(session_days, dtype=np.int64)
        day_index = np.minimum(np.searchsorted(session_days, day), session_days.size - 1)
        if not np.array_equal(session_days[day_index], day):
            raise ParameterError("events fall on days outside the given sessions")
    return EventSeries(
        timestamps=ts,
        calendar=calendar,
        day_index=day_index.astype(np.int64),
        local_time=local,
        session_days=session_days,
        n_dropped=n_dropped,
    )


def load_events(source, calendar: Calendar | None = None, column: str | None = None) -> EventSeries:
    """Load timestamps from ``source`` and partition them into sessions.

    ``source`` is a path to a CSV file (one timestamp column, header optional)
    or a JSONL file (``{"t": seconds}`` per line), or any iterable of numbers
    or ``{"t": ...}`` mappings.
    """
    calendar = calendar or Calendar()
    raw = read_timestamps(source, column=column)
    if raw.size == 0:
        raise EmptyDataError("input contains no records")
    return events_from_timestamps(raw, calendar)


def events_from_trading_time(trading_time, calendar: Calendar, n_days: int | None = None,
                             first_day: int = FIRST_MONDAY, session_days=None) -> EventSeries:
    """Map trading-time positions back onto calendar sessions.

    Sessions are ``session_days`` when given, otherwise the consecutive
    trading days starting at ``first_day``.
    """
    tt = np.sort(np.asarray(trading_time, dtype=float))
    T = float(calendar.session_duration_s)
    if session_days is not None:
        n_days = len(session_days)
    elif n_days is None:
        n_days = int(np.floor(tt[-1] / T)) + 1 if tt.size else 0
    if tt.size and (tt[0] < 0 or tt[-1] >= n_days * T):
        raise ParameterError("trading times must lie in [0, n_days * T)")
    if session_days is None:
        days = calendar.trading_days(n_days, first_day=first_day)
    else:
        days = np.asarray(session_days, dtype=np.int64)
    k = np.minimum(np.floor(tt / T).astype(np.int64), n_days - 1)
    local = tt - k * T
    ts = calendar.session_start(days[k]) + local
    return events_from_timestamps(ts, calendar, session_days=days)


def write_events(events: EventSeries, path, meta: dict | None = None) -> None:
    """Write events in the format ``load_events`` reads (by file extension)."""
    path = Path(path)
    if path.suffix.lower() in (".jsonl", ".ndjson", ".json"):
        with path.open("w") as fh:
            for t in events.timestamps:
                fh.write(json.dumps({"t": float(t)}) + "\n")
    else:
        with path.open("w", newline="") as fh:
            fh.write("t\n")
            for t in events.timestamps:
                fh.write(f"{float(t):.17g}\n")
    if meta:
        # provenance goes to a sidecar so the event file stays loadable
        Path(str(path) + ".meta.json").write_text(json.dumps(meta, indent=2, sort_keys=True) + "\n")


@dataclass
class MeanWaitGrid:
    scale_s: int
    delta: int
    means: np.ndarray
    counts: np.ndarray
    n_above_delta: int = 0
    cap: float | None = None

    @property
    def n_days(self) -> int:
        return self.means.shape[0]

    @property
    def session_duration_s(self) -> int:
        return self.scale_s * self.delta


def mean_wait_grid(events: EventSeries, scale_s: int, epsilon: float = 1e-6,
                   cap: float | None = None, close_final: bool = True) -> MeanWaitGrid:
    """Average the inter-event times of every (day, window) cell at scale ``scale_s``.

    Each interval belongs to the window holding its left border.  Zero waits
    (duplicate timestamps) are replaced by ``epsilon``.  With ``close_final``
    the last event's interval runs to the end of the final session.  ``cap``
    clips cell means from above (off by default).
    """
    T = events.calendar.session_duration_s
    scale_s = int(scale_s)
    if scale_s < 1 or T % scale_s:
        raise ScaleOutOfRangeError(f"scale s={scale_s} does not divide the session length T={T}")
    delta = T // scale_s
    waits = events.waits(close_final=close_final)
    day = events.day_index
    local = events.local_time
    if not close_final:
        day, local = day[:-1], local[:-1]
    waits = np.where(waits <= 0, epsilon, waits)
    window = np.minimum(np.floor(local / delta).astype(np.int64), scale_s - 1)
    cell = day * scale_s + window
    size = events.n_days * scale_s
    counts = np.bincount(cell, minlength=size).reshape(events.n_days, scale_s)
    sums = np.bincount(cell, weights=waits, minlength=size).reshape(events.n_days, scale_s)
    empty = np.argwhere(counts == 0)
    if empty.size:
        nu, i = (int(v) for v in empty[0])
        raise ScaleOutOfRangeError(
            f"scale s={scale_s}: window {i} of day {nu} (zero-based) holds no inter-event time; "
            f"{len(empty)} empty cells in total", day=nu, window=i)
    means = sums / counts
    n_above = int(np.count_nonzero(means > delta))
    if cap is not None:
        means = np.minimum(means, cap)
    return MeanWaitGrid(scale_s=scale_s, delta=int(delta), means=means, counts=counts,
                        n_above_delta=n_above, cap=cap)


@dataclass(frozen=True)
class ActivityStats:
    grand_mean_count: float
    grand_mean_wait: float


def activity_stats(grid: MeanWaitGrid) -> ActivityStats:
    return ActivityStats(grand_mean_count=float(grid.counts.mean()),
                         grand_mean_wait=float(grid.means.mean()))


def divisors_in_band(n: int, lo: int, hi: int) -> list[int]:
    return [d for d in range(max(lo, 1), min(hi, n) + 1) if n % d == 0]
