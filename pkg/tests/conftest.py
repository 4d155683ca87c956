"""Shared test helpers: random book streams and a naive OFI reference."""

from __future__ import annotations

import numpy as np
import pytest

from ofi_lab.lob import BookSeries


def random_book(rng: np.random.Generator, n_events: int = 200, n_levels: int = 3,
                t0: float = 36000.0, span: float = 600.0,
                allow_invalid: bool = False) -> BookSeries:
    """Random-walk book snapshots with valid level ordering."""
    tick = 100
    times = np.sort(rng.uniform(t0, t0 + span, n_events))
    mid_steps = rng.integers(-1, 2, n_events)
    mid = 2_000_000 + tick * np.cumsum(mid_steps)
    ask_price = mid[:, None] + tick * (1 + np.arange(n_levels))[None, :]
    bid_price = mid[:, None] - tick * (1 + np.arange(n_levels))[None, :]
    ask_size = rng.integers(1, 500, (n_events, n_levels))
    bid_size = rng.integers(1, 500, (n_events, n_levels))
    if allow_invalid:
        # sprinkle crossed books and sentinel levels
        crossed = rng.random(n_events) < 0.05
        bid_price[crossed, 0] = ask_price[crossed, 0] + tick
        absent = rng.random((n_events, n_levels)) < 0.05
        ask_size[absent] = 0
    return BookSeries(time=times, ask_price=ask_price, ask_size=ask_size,
                      bid_price=bid_price, bid_size=bid_size)


def naive_level_ofi(book: BookSeries, first: int, last: int, m: int) -> int:
    """Reference OFI: per-transition evaluation of the four indicator terms.

    Deliberately written as a direct loop over snapshot pairs, independent
    of the streaming implementation.
    """
    total = 0
    j = m - 1
    for n in range(first, last + 1):
        if n - 1 < 0:
            continue
        prev, cur = book[n - 1], book[n]
        if not (prev.valid and cur.valid):
            continue
        if prev.absent[0, j] or prev.absent[1, j] or cur.absent[0, j] or cur.absent[1, j]:
            continue
        term = 0
        if cur.bid_price[j] >= prev.bid_price[j]:
            term += cur.bid_size[j]
        if cur.bid_price[j] <= prev.bid_price[j]:
            term -= prev.bid_size[j]
        if cur.ask_price[j] <= prev.ask_price[j]:
            term -= cur.ask_size[j]
        if cur.ask_price[j] >= prev.ask_price[j]:
            term += prev.ask_size[j]
        total += int(term)
    return total


@pytest.fixture
def rng():
    return np.random.default_rng(12345)
