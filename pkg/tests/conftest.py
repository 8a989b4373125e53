import datetime as dt

import numpy as np
import pytest
from hypothesis import HealthCheck, settings

from grnn.data import TimeSeriesFrame, add_indicators, normalize, window
from grnn.numerics import Rng

settings.register_profile(
    "suite",
    derandomize=True,
    deadline=None,
    max_examples=50,
    suppress_health_check=[HealthCheck.too_slow],
)
settings.load_profile("suite")


def sine_frame(n: int = 200, period: float = 40.0) -> TimeSeriesFrame:
    dates = [dt.date(2020, 1, 1) + dt.timedelta(days=i) for i in range(n)]
    return TimeSeriesFrame(dates, {"SINE": np.sin(2 * np.pi * np.arange(n) / period)})


@pytest.fixture(scope="session")
def sine_dataset():
    """200-point noiseless sine framed with lookback 8, 80/20 split."""
    frame = sine_frame()
    norm_frame, norm = normalize(frame, fit_on="train_only")
    return window(norm_frame, lookback=8, norm=norm, split=0.80, target="SINE")


@pytest.fixture(scope="session")
def market_dataset():
    """Synthetic eight-feature bundle prepared like the reproduction profile."""
    from grnn.synthetic import make_sources

    dates, values = make_sources(seed=0)
    frame = TimeSeriesFrame(dates, dict(values))
    frame = add_indicators(frame, "NIFTY", ("MACD", "RSI"))
    norm_frame, norm = normalize(frame, fit_on="full")
    return window(norm_frame, lookback=10, norm=norm, split=0.80, target="NIFTY")


def random_frame(seed: int, n: int = 60, n_cols: int = 3) -> TimeSeriesFrame:
    rng = Rng(seed)
    dates = [dt.date(2019, 1, 1) + dt.timedelta(days=i) for i in range(n)]
    cols = {f"C{j}": np.cumsum(rng.standard_normal(n)) + 10.0 * (j + 1)
            for j in range(n_cols)}
    return TimeSeriesFrame(dates, cols)
