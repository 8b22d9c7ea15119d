"""Per-minute volatility from tick data, intraday pattern removal and normalization.

Two measures are built on a one-minute grid anchored at each session open:

* minute-close volatility ``R1(t) = |ln Y(t) - ln Y(t-1)|`` where ``Y(t)`` is the
  last in-session trade at or before the mark ``t``;
* realized volatility ``R2(t)``, the sum of absolute tick-to-tick log returns over
  the ticks in ``(t-1, t]``.

Session boundaries are hard: the first tick of a session has no predecessor, so no
overnight or lunch-break return enters either measure.
"""

from __future__ import annotations

import csv
import dataclasses
import datetime as dt
import enum
import io
import os
from dataclasses import dataclass, field
from typing import IO, Sequence

import numpy as np

from .errors import DataError, DegenerateInputError, ParseError, StageError

_EPOCH_DATE = dt.date(1970, 1, 1)


class Stage(str, enum.Enum):
    RAW = "raw"
    DESEASONALIZED = "deseasonalized"
    NORMALIZED = "normalized"


@dataclass(frozen=True)
class Session:
    """A daily trading window in seconds after midnight, ``open < close``.

    Both ends must sit on whole minutes so the one-minute grid is well defined.
    """

    open: int
    close: int

    def __post_init__(self):
        if not 0 <= self.open < self.close <= 86400:
            raise DataError(f"invalid session window {self.open}-{self.close}")
        if self.open % 60 or self.close % 60:
            raise DataError("session bounds must fall on whole minutes")

    @property
    def minutes(self) -> int:
        return (self.close - self.open) // 60

    def __str__(self) -> str:
        return f"{_hhmm(self.open)}-{_hhmm(self.close)}"


def _hhmm(seconds: int) -> str:
    return f"{seconds // 3600:02d}:{seconds % 3600 // 60:02d}"


def _parse_hhmm(text: str) -> int:
    hh, mm = text.strip().split(":")
    return int(hh) * 3600 + int(mm) * 60


def parse_sessions(spec: str | Sequence[str]) -> list[Session]:
    """Parse ``"09:30-11:30,13:00-15:00"`` (or a list of such windows)."""
    if isinstance(spec, str):
        spec = [s for s in spec.replace(";", ",").split(",") if s.strip()]
    sessions = []
    for window in spec:
        try:
            lo, hi = window.split("-")
            sessions.append(Session(_parse_hhmm(lo), _parse_hhmm(hi)))
        except ValueError as exc:
            raise DataError(f"bad session window {window!r}") from exc
    sessions.sort(key=lambda s: s.open)
    for a, b in zip(sessions, sessions[1:]):
        if b.open < a.close:
            raise DataError(f"overlapping sessions {a} and {b}")
    if not sessions:
        raise DataError("empty session list")
    return sessions


# Shanghai Stock Exchange continuous trading, 240 minutes a day.
SSE_SESSIONS = parse_sessions("09:30-11:30,13:00-15:00")


@dataclass(frozen=True)
class TickSeries:
    """Trades as (epoch seconds, price), strictly increasing in time."""

    times: np.ndarray
    prices: np.ndarray
    sessions: tuple[Session, ...]

    def __post_init__(self):
        times = np.asarray(self.times, dtype=np.int64)
        prices = np.asarray(self.prices, dtype=float)
        object.__setattr__(self, "times", times)
        object.__setattr__(self, "prices", prices)
        object.__setattr__(self, "sessions", tuple(self.sessions))
        if times.shape != prices.shape or times.ndim != 1:
            raise DataError("times and prices must be 1-d arrays of equal length")
        if np.any(~(prices > 0)):
            raise DataError("all prices must be positive")
        if np.any(np.diff(times) <= 0):
            raise DataError("tick timestamps must be strictly increasing")
        sod = times % 86400
        inside = np.zeros(len(times), dtype=bool)
        for s in self.sessions:
            inside |= (sod >= s.open) & (sod <= s.close)
        if not inside.all():
            raise DataError(f"{int((~inside).sum())} ticks fall outside the declared sessions")

    def __len__(self) -> int:
        return len(self.times)

    @property
    def days(self) -> np.ndarray:
        return self.times // 86400


def _parse_timestamp(text: str) -> int:
    text = text.strip()
    if "T" in text or " " in text or text.count("-") >= 2:
        stamp = dt.datetime.fromisoformat(text)
    else:
        stamp = dt.datetime.combine(_EPOCH_DATE, dt.time.fromisoformat(text))
    if stamp.tzinfo is not None:
        stamp = stamp.replace(tzinfo=None)
    delta = stamp - dt.datetime(1970, 1, 1)
    return delta.days * 86400 + delta.seconds


def parse_ticks(
    source: IO[bytes] | IO[str] | bytes | str | os.PathLike,
    sessions: Sequence[Session] | str = SSE_SESSIONS,
    drop_out_of_session: bool = True,
) -> TickSeries:
    """Read the ``timestamp,price`` CSV format.

    ``source`` may be a path, raw bytes or an open (binary or text) stream.  A
    timestamp without a date is placed on 1970-01-01.  Ticks outside every session
    are dropped, or rejected with :class:`DataError` when ``drop_out_of_session`` is
    false.
    """
    if isinstance(sessions, str):
        sessions = parse_sessions(sessions)
    if isinstance(source, (str, os.PathLike)):
        with open(source, "rb") as fh:
            data = fh.read()
    elif isinstance(source, bytes):
        data = source
    else:
        data = source.read()
    text = data.decode("utf-8") if isinstance(data, bytes) else data

    reader = csv.reader(io.StringIO(text))
    times: list[int] = []
    prices: list[float] = []
    for lineno, row in enumerate(reader, start=1):
        if not row or all(not c.strip() for c in row):
            continue
        if lineno == 1 and row[0].strip().lower() == "timestamp":
            continue
        if len(row) != 2:
            raise ParseError(f"expected 2 fields, got {len(row)}", lineno)
        try:
            stamp = _parse_timestamp(row[0])
            price = float(row[1])
        except ValueError as exc:
            raise ParseError(str(exc), lineno) from exc
        if not price > 0:
            raise DataError(f"line {lineno}: nonpositive price {row[1].strip()}")
        times.append(stamp)
        prices.append(price)

    t = np.asarray(times, dtype=np.int64)
    p = np.asarray(prices, dtype=float)
    bad = np.flatnonzero(np.diff(t) <= 0)
    if bad.size:
        raise DataError(f"timestamps not strictly increasing at data row {bad[0] + 2}")
    sod = t % 86400
    inside = np.zeros(len(t), dtype=bool)
    for s in sessions:
        inside |= (sod >= s.open) & (sod <= s.close)
    if not inside.all():
        if not drop_out_of_session:
            raise DataError(f"{int((~inside).sum())} ticks outside sessions")
        t, p = t[inside], p[inside]
    return TickSeries(t, p, tuple(sessions))


def write_ticks(ticks: TickSeries, fh: IO[str]) -> None:
    fh.write("timestamp,price\n")
    base = dt.datetime(1970, 1, 1)
    for t, p in zip(ticks.times.tolist(), ticks.prices.tolist()):
        stamp = base + dt.timedelta(seconds=t)
        fh.write(f"{stamp.isoformat()},{p!r}\n")


@dataclass(frozen=True)
class VolatilitySeries:
    """One nonnegative value per trading minute.

    ``minute_of_day`` is the running minute index within the trading day (across
    sessions); ``day_index`` numbers the trading days present in the data.
    Excluded (session, day) pairs are listed in ``gaps``.
    """

    values: np.ndarray
    minute_of_day: np.ndarray
    day_index: np.ndarray
    stage: Stage = Stage.RAW
    gaps: tuple[tuple[int, int], ...] = field(default=())

    def __post_init__(self):
        values = np.asarray(self.values, dtype=float)
        mod = np.asarray(self.minute_of_day, dtype=np.int64)
        day = np.asarray(self.day_index, dtype=np.int64)
        object.__setattr__(self, "values", values)
        object.__setattr__(self, "minute_of_day", mod)
        object.__setattr__(self, "day_index", day)
        object.__setattr__(self, "stage", Stage(self.stage))
        if not (values.shape == mod.shape == day.shape) or values.ndim != 1:
            raise DataError("values and labels must be 1-d arrays of equal length")
        if np.any(~np.isfinite(values)) or np.any(values < 0):
            raise DataError("volatility values must be finite and nonnegative")

    def __len__(self) -> int:
        return len(self.values)

    def with_values(self, values: np.ndarray, stage: Stage | None = None) -> "VolatilitySeries":
        return dataclasses.replace(self, values=values, stage=stage or self.stage)


def _session_days(ticks: TickSeries):
    """Yield (day_number, session_number, minute offset, times, prices) per session-day."""
    days = ticks.days
    sod = ticks.times % 86400
    day_values, day_starts = np.unique(days, return_index=True)
    day_ends = np.append(day_starts[1:], len(days))
    offsets = np.cumsum([0] + [s.minutes for s in ticks.sessions])
    for d, (lo, hi) in enumerate(zip(day_starts, day_ends)):
        for k, s in enumerate(ticks.sessions):
            seg = slice(lo, hi)
            m = (sod[seg] >= s.open) & (sod[seg] <= s.close)
            yield d, k, int(offsets[k]), sod[seg][m], ticks.prices[seg][m], s


def _build(ticks: TickSeries, measure: str) -> VolatilitySeries:
    values, mods, days, gaps = [], [], [], []
    for d, k, offset, sod, prices, session in _session_days(ticks):
        if len(sod) == 0:
            gaps.append((d, k))
            continue
        logp = np.log(prices)
        mins = session.minutes
        if measure == "R1":
            marks = session.open + 60 * np.arange(mins + 1)
            idx = np.searchsorted(sod, marks, side="right") - 1
            # Marks before the first trade take the session's first price.
            y = logp[np.maximum(idx, 0)]
            v = np.abs(np.diff(y))
        else:
            step = np.zeros(len(logp))
            step[1:] = np.abs(np.diff(logp))
            # Minute k covers (open + 60(k-1), open + 60k]; a tick exactly at the
            # open lands in bin 0, which is discarded (its return is 0 anyway).
            minute = -((session.open - sod) // 60)
            v = np.bincount(minute, weights=step, minlength=mins + 1)[1 : mins + 1]
        values.append(v)
        mods.append(offset + np.arange(mins))
        days.append(np.full(mins, d))
    if not values:
        raise DataError("no session contains any tick")
    return VolatilitySeries(
        np.concatenate(values),
        np.concatenate(mods),
        np.concatenate(days),
        Stage.RAW,
        tuple(gaps),
    )


def minute_close_volatility(ticks: TickSeries) -> VolatilitySeries:
    """Absolute log return between the prices at successive minute marks."""
    return _build(ticks, "R1")


def realized_volatility(ticks: TickSeries) -> VolatilitySeries:
    """Sum of absolute tick-to-tick log returns inside each minute.

    Minutes without trades get 0 and are kept.
    """
    return _build(ticks, "R2")


@dataclass(frozen=True)
class IntradayPattern:
    """Cross-day mean volatility per minute-of-day label (``labels`` ascending)."""

    labels: np.ndarray
    mean_by_minute: np.ndarray

    def lookup(self, minute_of_day: np.ndarray) -> np.ndarray:
        pos = np.searchsorted(self.labels, minute_of_day)
        pos = np.clip(pos, 0, len(self.labels) - 1)
        if np.any(self.labels[pos] != minute_of_day):
            missing = np.setdiff1d(minute_of_day, self.labels)
            raise DataError(f"pattern has no entry for minute labels {missing[:5].tolist()}")
        return self.mean_by_minute[pos]


def intraday_pattern(vol: VolatilitySeries) -> IntradayPattern:
    if vol.stage is not Stage.RAW:
        raise StageError(f"intraday pattern needs a raw series, got {vol.stage.value}")
    if len(np.unique(vol.day_index)) < 2:
        raise DataError("intraday pattern needs at least two days")
    labels, inverse = np.unique(vol.minute_of_day, return_inverse=True)
    sums = np.bincount(inverse, weights=vol.values)
    counts = np.bincount(inverse)
    means = sums / counts
    if np.any(means <= 0):
        bad = labels[means <= 0]
        raise DegenerateInputError(f"zero cross-day mean at minute labels {bad[:5].tolist()}")
    return IntradayPattern(labels, means)


def deseasonalize(vol: VolatilitySeries, pattern: IntradayPattern) -> VolatilitySeries:
    if vol.stage is not Stage.RAW:
        raise StageError(f"deseasonalize needs a raw series, got {vol.stage.value}")
    return vol.with_values(vol.values / pattern.lookup(vol.minute_of_day), Stage.DESEASONALIZED)


def normalize(vol: VolatilitySeries) -> VolatilitySeries:
    """Divide by the population standard deviation."""
    if vol.stage is not Stage.DESEASONALIZED:
        raise StageError(f"normalize needs a deseasonalized series, got {vol.stage.value}")
    sigma = float(np.std(vol.values))
    if not sigma > 0:
        raise DegenerateInputError("zero variance volatility series")
    return vol.with_values(vol.values / sigma, Stage.NORMALIZED)


def prepare(vol: VolatilitySeries) -> VolatilitySeries:
    """Raw series to normalized series: pattern removal then normalization."""
    return normalize(deseasonalize(vol, intraday_pattern(vol)))


def write_volatility(vol: VolatilitySeries, fh: IO[str]) -> None:
    fh.write("day,minute,value,stage\n")
    stage = vol.stage.value
    for d, m, v in zip(vol.day_index.tolist(), vol.minute_of_day.tolist(), vol.values.tolist()):
        fh.write(f"{d},{m},{v!r},{stage}\n")


def read_volatility(source: IO[str] | str | os.PathLike) -> VolatilitySeries:
    if isinstance(source, (str, os.PathLike)):
        with open(source, newline="") as fh:
            return read_volatility(fh)
    reader = csv.reader(source)
    header = next(reader, None)
    if header is None or [h.strip() for h in header] != ["day", "minute", "value", "stage"]:
        raise ParseError("expected header day,minute,value,stage", 1)
    days, mins, vals, stages = [], [], [], set()
    for lineno, row in enumerate(reader, start=2):
        if not row:
            continue
        try:
            d, m, v, s = row
            days.append(int(d))
            mins.append(int(m))
            vals.append(float(v))
            stages.add(Stage(s.strip()))
        except ValueError as exc:
            raise ParseError(str(exc), lineno) from exc
    if len(stages) > 1:
        raise DataError("mixed stages in one volatility file")
    stage = stages.pop() if stages else Stage.RAW
    return VolatilitySeries(np.array(vals), np.array(mins), np.array(days), stage)


def iter_labels(n: int, minutes_per_day: int) -> tuple[np.ndarray, np.ndarray]:
    """Minute-of-day and day labels for ``n`` consecutive trading minutes."""
    idx = np.arange(n)
    return idx % minutes_per_day, idx // minutes_per_day


__all__ = [
    "Stage",
    "Session",
    "SSE_SESSIONS",
    "TickSeries",
    "VolatilitySeries",
    "IntradayPattern",
    "parse_sessions",
    "parse_ticks",
    "write_ticks",
    "minute_close_volatility",
    "realized_volatility",
    "intraday_pattern",
    "deseasonalize",
    "normalize",
    "prepare",
    "write_volatility",
    "read_volatility",
    "iter_labels",
]
