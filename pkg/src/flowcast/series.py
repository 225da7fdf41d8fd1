"""Uniformly spaced time series and the transforms ARIMA modelling needs."""

from dataclasses import dataclass
from datetime import datetime, timedelta, timezone

import numpy as np

from .errors import AnchorMismatchError, DegenerateSeriesError, InsufficientDataError

BIN_SECONDS = 900
EPOCH = datetime(1970, 1, 1, tzinfo=timezone.utc)


@dataclass(frozen=True, eq=False)
class TimeSeries:
    """Immutable series with implied timestamps ``start_time + i * interval``.

    ``values`` is stored as a read-only float64 array; NaN and infinity are
    rejected so gaps must be resolved before a series is built.
    """

    values: np.ndarray
    start_time: datetime = EPOCH
    interval_seconds: int = BIN_SECONDS

    def __post_init__(self):
        arr = np.array(self.values, dtype=float).reshape(-1)
        if not np.all(np.isfinite(arr)):
            raise ValueError("TimeSeries values must be finite")
        if int(self.interval_seconds) != self.interval_seconds or self.interval_seconds <= 0:
            raise ValueError("interval_seconds must be a positive integer")
        start = self.start_time
        if start.tzinfo is None:
            start = start.replace(tzinfo=timezone.utc)
        arr.setflags(write=False)
        object.__setattr__(self, "values", arr)
        object.__setattr__(self, "start_time", start)
        object.__setattr__(self, "interval_seconds", int(self.interval_seconds))

    def __len__(self):
        return self.values.size

    @property
    def end_time(self):
        """Timestamp one interval past the last value."""
        return self.time_at(len(self))

    def time_at(self, i):
        return self.start_time + timedelta(seconds=i * self.interval_seconds)

    def timestamps(self):
        return [self.time_at(i) for i in range(len(self))]

    def with_values(self, values, offset=0):
        """New series sharing the cadence, starting ``offset`` intervals later."""
        return TimeSeries(values, self.time_at(offset), self.interval_seconds)

    def slice(self, start, stop=None):
        stop = len(self) if stop is None else stop
        return self.with_values(self.values[start:stop], offset=start)

    def index_of(self, when):
        """Integer index of timestamp ``when``; raises if it is off-grid."""
        delta = (when - self.start_time).total_seconds()
        idx, rem = divmod(delta, self.interval_seconds)
        if rem != 0:
            raise ValueError(f"{when.isoformat()} is not on the series grid")
        return int(idx)

    def equals(self, other):
        return (
            isinstance(other, TimeSeries)
            and self.start_time == other.start_time
            and self.interval_seconds == other.interval_seconds
            and np.array_equal(self.values, other.values)
        )


def difference(series, d):
    """Apply ``y(t) = x(t) - x(t - 1)`` ``d`` times."""
    if d < 0:
        raise ValueError("d must be non-negative")
    if len(series) <= d:
        raise InsufficientDataError(f"need more than {d} values to difference {d} times, got {len(series)}")
    return series.with_values(np.diff(series.values, n=d) if d else series.values, offset=d)


def anchors(series, d):
    """The first ``d`` original values, which :func:`integrate` needs to undo
    ``difference(series, d)``."""
    return series.values[:d].copy()


def integrate(diffed, seed_values, d):
    """Invert :func:`difference`.

    ``seed_values`` are the ``d`` original-scale values immediately preceding
    the differenced block, oldest first. The result covers the same time span
    as ``diffed``.
    """
    seed = np.asarray(seed_values, dtype=float).reshape(-1)
    if seed.size != d:
        raise AnchorMismatchError(f"expected {d} seed values, got {seed.size}")
    w = np.asarray(diffed.values, dtype=float)
    if d == 0:
        return diffed.with_values(w)
    return diffed.with_values(integrate_values(w, seed))


def integrate_values(w, seed):
    """Array form of :func:`integrate`; ``len(seed)`` is the differencing order."""
    # Start-up values of each lower differencing level, from the seed block.
    level_seeds = [np.asarray(seed, dtype=float)]
    for _ in range(len(seed) - 1):
        level_seeds.append(np.diff(level_seeds[-1]))
    out = np.asarray(w, dtype=float)
    for level in reversed(level_seeds):
        out = level[-1] + np.cumsum(out)
    return out


def acf(series, max_lag):
    """Biased, mean-centred sample autocorrelations at lags ``1..max_lag``."""
    x = np.asarray(series.values if isinstance(series, TimeSeries) else series, dtype=float)
    n = x.size
    if max_lag < 1:
        raise ValueError("max_lag must be positive")
    if n < 2 or n <= max_lag:
        raise InsufficientDataError(f"acf to lag {max_lag} needs more than {max_lag} values, got {n}")
    xc = x - x.mean()
    c0 = np.dot(xc, xc) / n
    if c0 <= 0.0 or not np.isfinite(c0):
        raise DegenerateSeriesError("autocorrelation of a zero-variance series is undefined")
    return np.array([np.dot(xc[k:], xc[:-k]) / n / c0 for k in range(1, max_lag + 1)])


def select_d(series, max_d=2):
    """Smallest differencing order after which one more pass stops lowering
    the sample standard deviation."""
    if max_d < 0:
        raise ValueError("max_d must be non-negative")
    if len(series) <= max_d + 2:
        raise InsufficientDataError(f"select_d with max_d={max_d} needs more than {max_d + 2} values")
    x = np.asarray(series.values, dtype=float)
    d = 0
    current = x.std()
    while d < max_d:
        nxt = np.diff(x, n=d + 1).std()
        if not nxt < current:
            break
        d += 1
        current = nxt
    return d
