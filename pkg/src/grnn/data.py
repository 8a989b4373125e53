"""Dataset preparation: CSV ingestion, MACD/RSI indicators, min-max scaling,
chronological splitting, and sliding-window supervised framing.

Input sources are comma-separated files with a header row, an ISO-8601
`Date` column, and one price column per source.  Sources trade on
different calendars, so ingestion inner-joins on date: only days present
in every source survive.  MACD (12-day EMA minus 26-day EMA) and Wilder's
14-day RSI are computed from the target column; the first 25 rows, where
MACD is undefined, are trimmed before any split.
"""

from __future__ import annotations

import csv
import datetime as dt
from dataclasses import dataclass

import numpy as np

from .numerics import FLOAT


class DataError(ValueError):
    """Input files or frame contents violate the data contracts."""


@dataclass
class TimeSeriesFrame:
    """Date-aligned multivariate series; column order is feature order."""

    dates: list
    columns: dict           # name -> 1-D float64 array

    def __post_init__(self):
        n = len(self.dates)
        for name, col in self.columns.items():
            col = np.asarray(col, dtype=FLOAT)
            if col.shape != (n,):
                raise DataError(f"column {name!r}: length {col.shape} != {n} dates")
            if not np.all(np.isfinite(col)):
                raise DataError(f"column {name!r} contains non-finite values")
            self.columns[name] = col
        for a, b in zip(self.dates, self.dates[1:]):
            if not a < b:
                raise DataError(f"dates not strictly increasing at {a} -> {b}")

    @property
    def n_rows(self) -> int:
        return len(self.dates)

    @property
    def feature_order(self) -> list:
        return list(self.columns)

    def matrix(self) -> np.ndarray:
        """(rows, features) array in column order."""
        return np.column_stack([self.columns[c] for c in self.columns])

    def slice(self, start: int, stop: int) -> "TimeSeriesFrame":
        return TimeSeriesFrame(self.dates[start:stop],
                               {k: v[start:stop].copy() for k, v in self.columns.items()})


@dataclass
class NormalizationParams:
    """Per-column min/max used by the affine [0,1] scaling."""

    bounds: dict            # name -> (x_min, x_max)

    def scale(self, column: str, values: np.ndarray) -> np.ndarray:
        lo, hi = self._get(column)
        return (np.asarray(values, dtype=FLOAT) - lo) / (hi - lo)

    def unscale(self, column: str, values: np.ndarray) -> np.ndarray:
        lo, hi = self._get(column)
        return np.asarray(values, dtype=FLOAT) * (hi - lo) + lo

    def column_range(self, column: str) -> float:
        lo, hi = self._get(column)
        return hi - lo

    def _get(self, column: str):
        if column not in self.bounds:
            raise DataError(f"unknown column {column!r} in normalization params")
        return self.bounds[column]


@dataclass
class WindowedDataset:
    """Supervised (window, next-step target) pairs after normalization."""

    train_x: np.ndarray     # (n_train, lookback, features)
    train_y: np.ndarray     # (n_train,)
    test_x: np.ndarray
    test_y: np.ndarray
    norm: NormalizationParams
    feature_order: list
    target_name: str
    lookback: int
    train_dates: list       # target date of each training sample
    test_dates: list


def inverse_transform(values, norm: NormalizationParams, column: str) -> np.ndarray:
    """Map normalized values back to raw units: x = z*(max-min) + min."""
    return norm.unscale(column, values)


def read_series_csv(path, column: str, date_column: str = "Date"):
    """Read (dates, values) from one delimited source file."""
    dates, values = [], []
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.DictReader(fh)
        if reader.fieldnames is None or date_column not in reader.fieldnames:
            raise DataError(f"{path}: missing {date_column!r} column")
        if column not in reader.fieldnames:
            raise DataError(f"{path}: missing value column {column!r}")
        for lineno, row in enumerate(reader, start=2):
            raw_date, raw_val = row.get(date_column), row.get(column)
            try:
                date = dt.date.fromisoformat((raw_date or "").strip())
                value = float(raw_val)
            except (TypeError, ValueError):
                raise DataError(
                    f"{path}:{lineno}: cannot parse date={raw_date!r} value={raw_val!r}"
                ) from None
            dates.append(date)
            values.append(value)
    if not dates:
        raise DataError(f"{path}: no data rows")
    return dates, values


def ingest(sources: dict, date_column: str = "Date") -> TimeSeriesFrame:
    """Inner-join sources on date.

    `sources` maps feature name -> (file path, value column name); only
    dates present in every source are kept, ordered ascending.
    """
    if not sources:
        raise DataError("no sources configured")
    per_feature = {}
    common: set | None = None
    for name, (path, column) in sources.items():
        dates, values = read_series_csv(path, column, date_column)
        mapping = dict(zip(dates, values))
        if len(mapping) != len(dates):
            raise DataError(f"{path}: duplicate dates")
        per_feature[name] = mapping
        common = set(mapping) if common is None else common & set(mapping)
    if not common:
        raise DataError("date intersection across sources is empty")
    ordered = sorted(common)
    columns = {name: np.array([per_feature[name][d] for d in ordered], dtype=FLOAT)
               for name in sources}
    return TimeSeriesFrame(ordered, columns)


def ema(series, period: int) -> np.ndarray:
    """Exponential moving average, SMA-seeded.

    k = 2/(period+1); the value at input index period-1 is the simple
    average of the first `period` points, then ema_t = k*x_t + (1-k)*ema.
    Output has length len(series) - period + 1 (undefined head trimmed).
    """
    x = np.asarray(series, dtype=FLOAT)
    if period < 1:
        raise DataError("ema: period must be >= 1")
    if x.size < period:
        raise DataError(f"ema: series length {x.size} < period {period}")
    k = 2.0 / (period + 1.0)
    out = np.empty(x.size - period + 1, dtype=FLOAT)
    out[0] = x[:period].mean()
    for j in range(1, out.size):
        out[j] = k * x[period - 1 + j] + (1.0 - k) * out[j - 1]
    return out


def macd(close) -> np.ndarray:
    """12-day EMA minus 26-day EMA, aligned where both are defined.

    Output has length len(close) - 25.
    """
    x = np.asarray(close, dtype=FLOAT)
    if x.size < 26:
        raise DataError(f"macd: need >= 26 points, got {x.size}")
    fast = ema(x, 12)
    slow = ema(x, 26)
    return fast[fast.size - slow.size:] - slow


def rsi(close, period: int = 14) -> np.ndarray:
    """Wilder's relative strength index in [0, 100].

    First average gain/loss is the simple mean of the first `period`
    changes; afterwards avg = (prev*(period-1) + current)/period.
    A zero average loss maps to RSI = 100.  Output has length
    len(close) - period, defined from input index `period` on.
    """
    x = np.asarray(close, dtype=FLOAT)
    if x.size < period + 1:
        raise DataError(f"rsi: need >= {period + 1} points, got {x.size}")
    deltas = np.diff(x)
    gains = np.maximum(deltas, 0.0)
    losses = np.maximum(-deltas, 0.0)
    out = np.empty(x.size - period, dtype=FLOAT)
    avg_gain = gains[:period].mean()
    avg_loss = losses[:period].mean()
    out[0] = 100.0 if avg_loss == 0.0 else 100.0 - 100.0 / (1.0 + avg_gain / avg_loss)
    for j in range(1, out.size):
        avg_gain = (avg_gain * (period - 1) + gains[period - 1 + j]) / period
        avg_loss = (avg_loss * (period - 1) + losses[period - 1 + j]) / period
        out[j] = 100.0 if avg_loss == 0.0 else 100.0 - 100.0 / (1.0 + avg_gain / avg_loss)
    return out


INDICATORS = {"MACD": macd, "RSI": rsi}


def add_indicators(frame: TimeSeriesFrame, source_column: str,
                   indicators=("MACD", "RSI")) -> TimeSeriesFrame:
    """Append indicator columns computed from `source_column`, trimming the
    head rows where any indicator is undefined."""
    if not indicators:
        return frame
    close = frame.columns.get(source_column)
    if close is None:
        raise DataError(f"indicator source column {source_column!r} not in frame")
    computed = {}
    trim = 0
    for name in indicators:
        fn = INDICATORS.get(name)
        if fn is None:
            raise DataError(f"unknown indicator {name!r}; supported: {sorted(INDICATORS)}")
        values = fn(close)
        computed[name] = values
        trim = max(trim, frame.n_rows - values.size)
    columns = {k: v[trim:].copy() for k, v in frame.columns.items()}
    for name, values in computed.items():
        columns[name] = values[values.size - (frame.n_rows - trim):].copy()
    return TimeSeriesFrame(frame.dates[trim:], columns)


def normalize(frame: TimeSeriesFrame, fit_on: str = "train_only",
              split: float = 0.80) -> tuple[TimeSeriesFrame, NormalizationParams]:
    """Min-max scale every column: z = (x - min)/(max - min).

    fit_on="train_only" (default) computes bounds on the first
    floor(split*N) rows so the test period cannot leak into scaling;
    fit_on="full" fits on all rows.
    """
    if fit_on not in ("train_only", "full"):
        raise DataError(f"fit_on must be 'train_only' or 'full', got {fit_on!r}")
    n_fit = frame.n_rows if fit_on == "full" else int(np.floor(split * frame.n_rows))
    if n_fit < 2:
        raise DataError("not enough rows to fit normalization")
    bounds = {}
    scaled = {}
    for name, col in frame.columns.items():
        lo = float(col[:n_fit].min())
        hi = float(col[:n_fit].max())
        if not hi > lo:
            raise DataError(f"column {name!r} is constant over the fitting rows")
        bounds[name] = (lo, hi)
        scaled[name] = (col - lo) / (hi - lo)
    return TimeSeriesFrame(list(frame.dates), scaled), NormalizationParams(bounds)


def window(frame: TimeSeriesFrame, lookback: int, norm: NormalizationParams,
           split: float = 0.80, target: str = "NIFTY") -> WindowedDataset:
    """Frame a normalized series as supervised windows.

    The chronological split comes first, at floor(split*N) rows; windows
    are then built within each side independently, so no window straddles
    the boundary.  Sample i is (rows [i, i+lookback), target at row
    i+lookback) -- the target is always strictly after its window.
    """
    if lookback < 1:
        raise DataError("lookback must be >= 1")
    if target not in frame.columns:
        raise DataError(f"target column {target!r} not in frame")
    n = frame.n_rows
    n_train = int(np.floor(split * n))
    if n_train < lookback + 1 or (n - n_train) < lookback + 1:
        raise DataError(
            f"split {split} of {n} rows leaves a side shorter than lookback+1={lookback + 1}")

    data = frame.matrix()
    names = frame.feature_order
    t_idx = names.index(target)

    def build(lo: int, hi: int):
        rows = data[lo:hi]
        count = (hi - lo) - lookback
        xs = np.stack([rows[i:i + lookback] for i in range(count)])
        ys = rows[lookback:, t_idx].copy()
        dates = frame.dates[lo + lookback:hi]
        return xs, ys, dates

    train_x, train_y, train_dates = build(0, n_train)
    test_x, test_y, test_dates = build(n_train, n)
    return WindowedDataset(
        train_x=train_x, train_y=train_y, test_x=test_x, test_y=test_y,
        norm=norm, feature_order=names, target_name=target, lookback=lookback,
        train_dates=train_dates, test_dates=test_dates,
    )


def write_frame_csv(path, frame: TimeSeriesFrame, date_column: str = "Date") -> None:
    """Write a frame as delimited text (dates plus every column, full precision)."""
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow([date_column] + frame.feature_order)
        cols = [frame.columns[c] for c in frame.feature_order]
        for idx, date in enumerate(frame.dates):
            writer.writerow([date.isoformat()] + [repr(float(c[idx])) for c in cols])


def read_frame_csv(path, date_column: str = "Date") -> TimeSeriesFrame:
    """Read a frame written by write_frame_csv."""
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if not header or header[0] != date_column:
            raise DataError(f"{path}: expected leading {date_column!r} column")
        names = header[1:]
        dates, rows = [], []
        for lineno, row in enumerate(reader, start=2):
            if len(row) != len(header):
                raise DataError(f"{path}:{lineno}: expected {len(header)} fields")
            try:
                dates.append(dt.date.fromisoformat(row[0]))
                rows.append([float(v) for v in row[1:]])
            except ValueError:
                raise DataError(f"{path}:{lineno}: unparseable row") from None
    arr = np.asarray(rows, dtype=FLOAT)
    return TimeSeriesFrame(dates, {name: arr[:, j].copy() for j, name in enumerate(names)})
