"""Stream-to-panel assembly: bucketing, features and volatility joins."""

from __future__ import annotations

import numpy as np

from .features import (
    FeaturePanel,
    compute_day_features,
    minute_returns,
    sigma_for_buckets,
)
from .lob import BookSeries, bucketize

FULL_DAY = (34200.0, 57600.0)       # 09:30 - 16:00
MODEL_SESSION = (36000.0, 55800.0)  # 10:00 - 15:30, trimmed half hours


def build_panel(
    books: dict[tuple[str, str], BookSeries],
    session: tuple[float, float] = MODEL_SESSION,
    bucket_seconds: float = 10.0,
    day_bounds: tuple[float, float] = FULL_DAY,
    vol_days: int = 5,
) -> FeaturePanel:
    """Compute per-bucket features for every stock-day.

    Volatility for a bucket ending at clock time t averages, over up to
    ``vol_days`` prior days of the same stock, the sample std of 1-minute
    returns in [t - 30min, t]; stock-days with no prior history keep NaN
    sigma and are excluded from normalized-return models by the row flags.
    """
    panel = FeaturePanel()
    by_stock: dict[str, list[str]] = {}
    for stock, day in sorted(books):
        by_stock.setdefault(stock, []).append(day)
    minute_cache: dict[tuple[str, str], tuple[np.ndarray, np.ndarray]] = {}
    for stock, days in by_stock.items():
        for day in days:
            minute_cache[(stock, day)] = minute_returns(books[(stock, day)], day_bounds)
    for stock, days in by_stock.items():
        for di, day in enumerate(days):
            book = books[(stock, day)]
            buckets = bucketize(book, session, bucket_seconds)
            ends = np.array([b.window_end for b in buckets])
            prior = [minute_cache[(stock, d)] for d in days[max(0, di - vol_days): di]]
            sigma = sigma_days = None
            if prior:
                sigma, sigma_days = sigma_for_buckets(prior, ends)
            panel.add(compute_day_features(book, buckets, stock=stock, day=day,
                                           sigma=sigma, sigma_days=sigma_days))
    return panel


def minute_panel(
    books: dict[tuple[str, str], BookSeries],
    day_bounds: tuple[float, float] = FULL_DAY,
):
    """Full-day minutely (ofi1, returns, times) series per stock-day.

    Raw inputs for the OFI-sign holding-period profile, which uses the
    whole trading day rather than the trimmed modeling session.
    """
    out = []
    for (stock, day), book in sorted(books.items()):
        buckets = bucketize(book, day_bounds, 60.0)
        from .features import bucket_ofis

        ofi1 = bucket_ofis(book, buckets)[:, 0].astype(np.float64)
        times, rets = minute_returns(book, day_bounds)
        out.append((ofi1, rets, times))
    return out
