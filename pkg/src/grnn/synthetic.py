"""Deterministic synthetic market data with the eight-feature schema.

Real source files (index closes, crude, VIX, FX, gold) cannot ship with
the repository, so experiments and the acceptance suite fall back to a
generated bundle with the same shape: six raw daily series on a weekday
calendar, from which the preparation pipeline derives MACD and RSI.  The
target series couples to the previous day's foreign-index move and to the
volatility level, is smooth at the daily scale, and trends across a
15-year range, which is what makes next-day prediction learnable.

Everything is a pure function of the seed: the same seed writes
byte-identical CSV files.
"""

from __future__ import annotations

import csv
import datetime as dt
import os

import numpy as np

from .numerics import FLOAT, Rng

SOURCE_NAMES = ("NIFTY", "SP500", "CRUDE", "VIX", "INRUSD", "GOLD")
DEFAULT_DAYS = 3674        # leaves 3649 rows once the indicator head is trimmed


def weekday_calendar(start: dt.date, n_days: int) -> list:
    out = []
    day = start
    while len(out) < n_days:
        if day.weekday() < 5:
            out.append(day)
        day += dt.timedelta(days=1)
    return out


def _ar1(rng: Rng, n: int, rho: float, scale: float) -> np.ndarray:
    eps = rng.standard_normal(n)
    out = np.empty(n, dtype=FLOAT)
    out[0] = eps[0] * scale
    for t in range(1, n):
        out[t] = rho * out[t - 1] + scale * eps[t]
    return out


def make_sources(seed: int = 0, n_days: int = DEFAULT_DAYS,
                 start: dt.date = dt.date(2009, 1, 2)) -> tuple[list, dict]:
    """Return (dates, {source name -> values}) for the six raw series."""
    rng = Rng(seed)
    dates = weekday_calendar(start, n_days)
    t = np.arange(n_days, dtype=FLOAT)
    frac = t / (n_days - 1)

    # volatility regime first: spiky, mean-reverting, strictly positive
    vix_noise = _ar1(rng.child(1), n_days, rho=0.98, scale=0.06)
    vix = np.exp(np.log(18.0) + 0.35 * np.sin(2 * np.pi * t / 947.0) + vix_noise)

    # growth saturates late: bull decades then a sideways regime, so the
    # held-out tail oscillates through levels the training years visited
    ease = np.tanh(2.4 * frac) / np.tanh(2.4)

    # US index: saturating trend plus cycles plus persistent noise
    sp_noise = _ar1(rng.child(2), n_days, rho=0.9, scale=0.0035)
    log_sp = (np.log(700.0) + ease * np.log(4700.0 / 700.0)
              + 0.05 * np.sin(2 * np.pi * t / 1259.0) + sp_noise)
    sp500 = np.exp(log_sp)
    # coupling uses the shock component only; coupling to raw returns
    # would compound the whole US trend into the target's level
    sp_shock = np.concatenate(([0.0], np.diff(sp_noise)))

    # target index: its own trend/cycles, spillover from yesterday's US
    # move, risk-off drag when volatility runs high
    own = _ar1(rng.child(3), n_days, rho=0.9, scale=0.0025)
    log_nifty = np.empty(n_days, dtype=FLOAT)
    base = np.log(2650.0) + ease * np.log(19500.0 / 2650.0)
    cycle = 0.05 * np.sin(2 * np.pi * t / 1511.0) + 0.05 * np.sin(2 * np.pi * t / 341.0)
    log_nifty[0] = base[0]
    for k in range(1, n_days):
        drift = base[k] - base[k - 1] + cycle[k] - cycle[k - 1]
        spill = 0.35 * sp_shock[k - 1]
        risk = -0.0012 * (vix[k - 1] / 18.0 - 1.0)
        log_nifty[k] = log_nifty[k - 1] + drift + spill + risk + (own[k] - own[k - 1])
    nifty = np.exp(log_nifty)

    crude = np.exp(np.log(65.0) + 0.28 * np.sin(2 * np.pi * t / 1700.0 + 1.0)
                   + _ar1(rng.child(4), n_days, rho=0.985, scale=0.012))
    inrusd = 44.0 + 38.0 * ease + 2.5 * np.sin(2 * np.pi * t / 1100.0) \
        + _ar1(rng.child(5), n_days, rho=0.99, scale=0.08)
    gold = np.exp(np.log(900.0) + ease * np.log(2000.0 / 900.0)
                  + 0.1 * np.sin(2 * np.pi * t / 1900.0 + 2.0)
                  + _ar1(rng.child(6), n_days, rho=0.97, scale=0.004))

    values = {"NIFTY": nifty, "SP500": sp500, "CRUDE": crude,
              "VIX": vix, "INRUSD": inrusd, "GOLD": gold}
    return dates, {k: np.round(v, 4) for k, v in values.items()}


def write_bundle(directory, seed: int = 0, n_days: int = DEFAULT_DAYS,
                 start: dt.date = dt.date(2009, 1, 2)) -> dict:
    """Write one CSV per source; returns {name: (path, value column)}."""
    os.makedirs(directory, exist_ok=True)
    dates, values = make_sources(seed, n_days, start)
    manifest = {}
    for name in SOURCE_NAMES:
        path = os.path.join(directory, f"{name.lower()}.csv")
        with open(path, "w", newline="", encoding="utf-8") as fh:
            writer = csv.writer(fh)
            writer.writerow(["Date", "Close"])
            for d, v in zip(dates, values[name]):
                writer.writerow([d.isoformat(), repr(float(v))])
        manifest[name] = (path, "Close")
    return manifest


def write_sine(path, n_points: int = 400, period: float = 40.0,
               start: dt.date = dt.date(2020, 1, 1)) -> tuple[str, str]:
    """Noiseless sine wave CSV for smoke runs; returns (path, column)."""
    dates = weekday_calendar(start, n_points)
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(["Date", "Value"])
        for i, d in enumerate(dates):
            writer.writerow([d.isoformat(), repr(float(np.sin(2 * np.pi * i / period)))])
    return path, "Value"
