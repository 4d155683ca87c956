"""OFI, depth, return and volatility feature contracts."""

from __future__ import annotations

import numpy as np
import pytest
from conftest import naive_level_ofi, random_book

from ofi_lab.features import (
    bucket_depths,
    bucket_ofis,
    compute_day_features,
    depth_scale,
    level_ofi,
    log_return,
    normalize_ofi,
    realized_vol,
)
from ofi_lab.lob import BookSeries, BucketIndex, bucketize


def _book(rows):
    """rows: list of (time, ask_px, ask_sz, bid_px, bid_sz) single-level books."""
    arr = np.array(rows, dtype=np.float64)
    return BookSeries(
        time=arr[:, 0],
        ask_price=arr[:, 1:2].astype(np.int64),
        ask_size=arr[:, 2:3].astype(np.int64),
        bid_price=arr[:, 3:4].astype(np.int64),
        bid_size=arr[:, 4:5].astype(np.int64),
    )


def _one_bucket(book):
    return BucketIndex(window_start=book.time[0] - 1.0, window_end=book.time[-1],
                       first_event=0, last_event=len(book) - 1)


def test_ofi_bid_size_increase_equal_prices():
    book = _book([(1, 1000200, 150, 1000000, 200),
                  (2, 1000200, 150, 1000000, 250)])
    assert level_ofi(_one_bucket(book), book, 1) == 50


def test_ofi_bid_price_rise():
    book = _book([(1, 1000200, 150, 1000000, 200),
                  (2, 1000200, 150, 1000100, 80)])
    assert level_ofi(_one_bucket(book), book, 1) == 80


def test_ofi_ask_price_fall():
    book = _book([(1, 1000200, 150, 1000000, 200),
                  (2, 1000100, 120, 1000000, 200)])
    assert level_ofi(_one_bucket(book), book, 1) == -120


def test_ofi_identical_snapshots_zero():
    book = _book([(1, 1000200, 150, 1000000, 200),
                  (2, 1000200, 150, 1000000, 200)])
    assert level_ofi(_one_bucket(book), book, 1) == 0


def test_ofi_empty_bucket_zero():
    book = _book([(1, 1000200, 150, 1000000, 200)])
    empty = BucketIndex(window_start=5.0, window_end=6.0, first_event=1, last_event=0)
    assert empty.event_count == 0
    assert level_ofi(empty, book, 1) == 0


def test_ofi_oracle_equivalence(rng):
    """Streaming implementation equals the naive reference, exactly."""
    book = random_book(rng, n_events=10_000, n_levels=3, span=3000.0,
                       allow_invalid=True)
    buckets = bucketize(book, (36000.0, 39000.0), 30.0)
    got = bucket_ofis(book, buckets)
    for m in range(1, 4):
        want = np.array([
            naive_level_ofi(book, b.first_event, b.last_event, m) for b in buckets
        ])
        assert np.array_equal(got[:, m - 1], want)


def test_ofi_additive_over_partitions(rng):
    book = random_book(rng, n_events=400, n_levels=2, span=600.0)
    whole = bucketize(book, (36000.0, 36600.0), 600.0)
    parts = bucketize(book, (36000.0, 36600.0), 60.0)
    total = bucket_ofis(book, whole)[0]
    pieces = bucket_ofis(book, parts).sum(axis=0)
    assert np.array_equal(total, pieces)


def test_scale_property(rng):
    book = random_book(rng, n_events=300, n_levels=2)
    doubled = BookSeries(book.time, book.ask_price, book.ask_size * 2,
                         book.bid_price, book.bid_size * 2)
    buckets = bucketize(book, (36000.0, 36600.0), 60.0)
    assert np.array_equal(bucket_ofis(doubled, buckets), 2 * bucket_ofis(book, buckets))
    q1 = bucket_depths(book, buckets)
    q2 = bucket_depths(doubled, buckets)
    assert np.allclose(q2, 2 * q1, equal_nan=True)
    n1 = normalize_ofi(bucket_ofis(book, buckets).astype(float), q1[:, None])
    n2 = normalize_ofi(bucket_ofis(doubled, buckets).astype(float), q2[:, None])
    assert np.allclose(n1, n2, equal_nan=True)


def test_depth_scale_example():
    book = _book([(1, 1000200, 150, 1000000, 200),
                  (2, 1000200, 150, 1000000, 250)])
    q = depth_scale(_one_bucket(book), book)
    assert q == pytest.approx((350 + 400) / 4.0)
    assert q == 187.5


def test_depth_constant_sizes():
    s, m = 80, 3
    rows = np.zeros((5, m))
    book = BookSeries(
        time=np.arange(5, dtype=float),
        ask_price=2_000_000 + 100 * (1 + np.arange(m))[None, :] + rows.astype(np.int64),
        ask_size=np.full((5, m), s, dtype=np.int64),
        bid_price=2_000_000 - 100 * (1 + np.arange(m))[None, :] + rows.astype(np.int64),
        bid_size=np.full((5, m), s, dtype=np.int64),
    )
    bucket = BucketIndex(window_start=-1.0, window_end=4.0, first_event=0, last_event=4)
    assert depth_scale(bucket, book) == m * s


def test_depth_empty_bucket_nan():
    book = _book([(1, 1000200, 150, 1000000, 200)])
    empty = BucketIndex(window_start=5.0, window_end=6.0, first_event=1, last_event=0)
    assert np.isnan(depth_scale(empty, book))


def test_normalize_ofi_values():
    assert normalize_ofi(50.0, 500.0) == pytest.approx(0.1)
    assert normalize_ofi(0.0, 123.0) == 0.0
    assert normalize_ofi(-120.0, 187.5) == pytest.approx(-0.64)
    assert np.isnan(normalize_ofi(5.0, 0.0))


def test_log_return_values():
    assert log_return(100.0, 100.0) == 0.0
    assert log_return(101.0, 100.0) == pytest.approx(0.00995033085316808, abs=1e-12)
    assert log_return(100.0, 101.0) == pytest.approx(-0.00995033085316808, abs=1e-12)
    assert np.isnan(log_return(-1.0, 100.0))


def test_realized_vol_zero_returns():
    sigma, used = realized_vol([np.zeros(30), np.zeros(30)])
    assert sigma == 0.0 and used == 2


def test_realized_vol_alternating_closed_form():
    x = 0.002
    n = 30
    day = np.tile([x, -x], n // 2)
    sigma, used = realized_vol([day])
    assert used == 1
    assert sigma == pytest.approx(x * np.sqrt(n / (n - 1)))


def test_realized_vol_five_identical_days():
    day = np.random.default_rng(3).normal(0, 1e-3, 30)
    sigma1, _ = realized_vol([day])
    sigma5, used = realized_vol([day] * 5)
    assert used == 5
    assert sigma5 == pytest.approx(sigma1)


def test_realized_vol_no_history():
    sigma, used = realized_vol([])
    assert np.isnan(sigma) and used == 0


def test_crossed_transition_contributes_zero():
    rows = [(1, 1000200, 150, 1000000, 200),
            (2, 1000000, 150, 1000200, 200),   # crossed
            (3, 1000200, 150, 1000000, 260)]
    book = _book(rows)
    assert bool(book.crossed[1])
    # both transitions touch the crossed snapshot -> total contribution 0
    assert level_ofi(_one_bucket(book), book, 1) == 0


def test_day_features_empty_bucket_carries_q(rng):
    book = random_book(rng, n_events=50, span=100.0)
    # wide grid so some buckets are empty
    buckets = bucketize(book, (36000.0, 36600.0), 10.0)
    feats = compute_day_features(book, buckets, sigma=np.full(60, 1e-3))
    empties = feats.empty
    assert empties.any()
    assert np.isfinite(feats.q[empties][1:]).all() or empties[0]
    assert (feats.ofi_raw[empties] == 0).all()
