"""Series containers, CSV ingestion, increments and scanning windows.

The trading-day index ``t`` is the position of an observation in the
filtered series, so holidays and other gaps do not advance it.
"""
from __future__ import annotations

import csv
import datetime as dt
import warnings
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterator, NamedTuple

import numpy as np

from .errors import DuplicateDateError, InsufficientDataError, InputError, ParseError, RangeError


def _frozen(a, dtype=float):
    a = np.array(a, dtype=dtype)
    a.setflags(write=False)
    return a


@dataclass(frozen=True)
class PriceSeries:
    """Dated index or price levels, sorted by date."""

    timestamps: np.ndarray
    values: np.ndarray
    label: str = ""

    def __post_init__(self):
        ts = _frozen(self.timestamps, "datetime64[D]")
        vals = _frozen(self.values)
        if ts.shape != vals.shape or ts.ndim != 1:
            raise InputError("timestamps and values must be 1-d arrays of equal length")
        if len(vals) < 2:
            raise InsufficientDataError("a price series needs at least 2 observations")
        if not np.all(np.isfinite(vals)) or np.any(vals <= 0):
            raise InputError("price values must be finite and strictly positive")
        steps = np.diff(ts).astype(np.int64)
        if np.any(steps == 0):
            raise DuplicateDateError("duplicate dates in price series")
        if np.any(steps < 0):
            raise InputError("timestamps must be strictly increasing")
        object.__setattr__(self, "timestamps", ts)
        object.__setattr__(self, "values", vals)

    def __len__(self):
        return len(self.values)

    @property
    def t(self) -> np.ndarray:
        return np.arange(len(self.values))


@dataclass(frozen=True)
class Signal:
    """Detrended (or simulated) signal on the trading-day index.

    ``trend`` is kept when the signal came out of :func:`detrend` so the
    source levels can be rebuilt with :meth:`retrend`.
    """

    t: np.ndarray
    x: np.ndarray
    trend: np.ndarray | None = None
    label: str = ""

    def __post_init__(self):
        t = _frozen(self.t, np.int64)
        x = _frozen(self.x)
        if t.shape != x.shape or t.ndim != 1:
            raise InputError("t and x must be 1-d arrays of equal length")
        object.__setattr__(self, "t", t)
        object.__setattr__(self, "x", x)
        if self.trend is not None:
            tr = _frozen(self.trend)
            if tr.shape != x.shape:
                raise InputError("trend must match the signal length")
            object.__setattr__(self, "trend", tr)

    def __len__(self):
        return len(self.x)

    @classmethod
    def from_values(cls, x, label="") -> "Signal":
        x = np.asarray(x, dtype=float)
        return cls(np.arange(len(x)), x, label=label)

    def retrend(self) -> np.ndarray:
        if self.trend is None:
            raise InputError("signal carries no trend to add back")
        return self.x + self.trend


@dataclass(frozen=True)
class Increments:
    dx: np.ndarray
    t: np.ndarray = field(default=None)

    def __post_init__(self):
        dx = _frozen(self.dx)
        object.__setattr__(self, "dx", dx)
        t = np.arange(len(dx)) if self.t is None else self.t
        object.__setattr__(self, "t", _frozen(t, np.int64))

    def __len__(self):
        return len(self.dx)

    def integrate(self, x0: float) -> np.ndarray:
        """Rebuild the signal from its first value by cumulative summation."""
        return np.concatenate(([x0], x0 + np.cumsum(self.dx)))


@dataclass(frozen=True)
class WindowSpec:
    width: int = 20
    step: int = 20

    def __post_init__(self):
        if int(self.width) != self.width or int(self.step) != self.step:
            raise InputError("window width and step must be integers")
        if self.width < 3:
            raise InputError("window width must be at least 3")
        if self.step < 1:
            raise InputError("window step must be at least 1")

    def count(self, n: int) -> int:
        if self.width > n:
            return 0
        return (n - self.width) // self.step + 1


class Window(NamedTuple):
    start: int
    end: int
    center: int
    values: np.ndarray


def _parse_date(text: str) -> np.datetime64:
    return np.datetime64(dt.date.fromisoformat(text.strip()), "D")


def ingest_csv(path, column: str, date_column: str | None = None, label: str | None = None) -> PriceSeries:
    """Read one numeric column of a dated CSV file.

    Rows whose value cell is empty are skipped with a warning naming
    their line numbers; any other unparseable cell is an error.
    """
    path = Path(path)
    if not path.exists():
        raise InputError(f"input not found: {path}")
    with path.open(newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        try:
            header = [h.strip() for h in next(reader)]
        except StopIteration:
            raise InsufficientDataError(f"{path} is empty") from None
        if column not in header:
            raise ParseError(f"column {column!r} not in header {header}", line=1)
        if date_column is None:
            date_column = "date" if "date" in header else header[0]
        if date_column not in header:
            raise ParseError(f"date column {date_column!r} not in header", line=1)
        ci, di = header.index(column), header.index(date_column)
        dates, values, skipped = [], [], []
        for row in reader:
            line = reader.line_num
            if not row or all(not c.strip() for c in row):
                continue
            if len(row) != len(header):
                raise ParseError(f"expected {len(header)} fields, got {len(row)}", line=line)
            cell = row[ci].strip()
            if cell == "":
                skipped.append(line)
                continue
            try:
                d = _parse_date(row[di])
            except ValueError:
                raise ParseError(f"bad ISO-8601 date {row[di]!r}", line=line) from None
            try:
                v = float(cell)
            except ValueError:
                raise ParseError(f"non-numeric {column} value {cell!r}", line=line) from None
            if not np.isfinite(v):
                raise ParseError(f"non-finite {column} value {cell!r}", line=line)
            dates.append(d)
            values.append(v)
    if skipped:
        warnings.warn(f"{path}: skipped rows with missing {column!r} at lines {skipped}")
    if len(values) < 2:
        raise InsufficientDataError(f"{path}: fewer than 2 valid rows")
    dates = np.array(dates, dtype="datetime64[D]")
    values = np.array(values)
    order = np.argsort(dates, kind="stable")
    dates, values = dates[order], values[order]
    dup = np.nonzero(np.diff(dates).astype(np.int64) == 0)[0]
    if len(dup):
        raise DuplicateDateError(f"{path}: duplicate date {dates[dup[0]]}")
    return PriceSeries(dates, values, label if label is not None else column)


def detrend(series: PriceSeries, trend, side: str, t_offset: int = 0, slack: float = 0.0) -> Signal:
    """Subtract a fitted trend from the series.

    ``trend`` is a :class:`catews.trend.TrendParams`. The bull side is valid
    for ``t <= t_c`` and the bear side for ``t >= t_c``; ``slack`` widens the
    admissible range by that many trading days.
    """
    from .trend import trend_values

    if side not in ("bull", "bear"):
        raise InputError("side must be 'bull' or 'bear'")
    t = np.arange(len(series)) + int(t_offset)
    if side == "bull" and t[-1] > trend.t_c + slack:
        raise RangeError(f"bull-side trend valid up to t_c={trend.t_c:g}, series reaches t={t[-1]}")
    if side == "bear" and t[0] < trend.t_c - slack:
        raise RangeError(f"bear-side trend valid from t_c={trend.t_c:g}, series starts at t={t[0]}")
    tr = trend_values(trend, t)
    return Signal(t, series.values - tr, trend=tr, label=series.label)


def increments(signal) -> Increments:
    x = signal.x if isinstance(signal, Signal) else np.asarray(signal, dtype=float)
    if len(x) < 2:
        raise InsufficientDataError("increments need at least 2 points")
    t = signal.t[:-1] if isinstance(signal, Signal) else None
    return Increments(np.diff(x), t)


def windows(signal, spec: WindowSpec) -> Iterator[Window]:
    """Yield contiguous scanning windows; ``center`` is ``start + width // 2``."""
    x = signal.x if isinstance(signal, Signal) else np.asarray(signal, dtype=float)
    n = len(x)
    if spec.width > n:
        raise InsufficientDataError(f"window width {spec.width} exceeds series length {n}")
    for k in range(spec.count(n)):
        start = k * spec.step
        end = start + spec.width
        yield Window(start, end, start + spec.width // 2, x[start:end])
