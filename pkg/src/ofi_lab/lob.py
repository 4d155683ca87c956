"""LOBSTER-format ingestion: message/orderbook parsing and time bucketing.

A LOBSTER instrument-day is a pair of headerless CSV files aligned by row:
the message file (time, type, order_id, size, price, direction) and the
orderbook file (ask_price_1, ask_size_1, bid_price_1, bid_size_1, ... for M
levels).  Prices are integer units of 1e-4 dollars; times are seconds after
midnight.  Row i of the orderbook file is the book state immediately after
message row i.
"""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

import numpy as np

# LOBSTER fills unoccupied levels with a huge dummy price and zero size.
PRICE_SENTINEL = 9999999999

# Maximum tolerated backwards jump between consecutive event times (seconds).
TIME_REGRESSION_TOL = 1e-9

MESSAGE_COLUMNS = ("time", "event_type", "order_id", "size", "price", "direction")


@dataclass(frozen=True)
class LobEvent:
    """One row of a LOBSTER message file."""

    time: float
    event_type: int
    order_id: int
    size: int
    price: int
    direction: int


@dataclass(frozen=True)
class BookSnapshot:
    """Book state after one event: top-M prices/sizes plus validity flags."""

    time: float
    event_index: int
    ask_price: np.ndarray
    ask_size: np.ndarray
    bid_price: np.ndarray
    bid_size: np.ndarray
    absent: np.ndarray  # per side/level: (2, M) bool, row 0 = ask, row 1 = bid
    crossed: bool

    @property
    def valid(self) -> bool:
        """Level-1 present on both sides and not crossed."""
        return not self.crossed and not self.absent[0, 0] and not self.absent[1, 0]


@dataclass(frozen=True)
class BucketIndex:
    """Half-open time bucket (window_start, window_end] over the event stream.

    ``first_event``/``last_event`` are 0-based positions in the day's stream.
    An empty bucket has ``last_event == first_event - 1`` so that
    ``event_count == last_event - first_event + 1`` holds uniformly.
    """

    window_start: float
    window_end: float
    first_event: int
    last_event: int

    @property
    def event_count(self) -> int:
        return self.last_event - self.first_event + 1


class BookSeries:
    """Column-oriented sequence of BookSnapshot for one instrument-day.

    Supports ``len``, integer indexing (returns a BookSnapshot view) and
    iteration; the feature code works on the underlying arrays directly.
    """

    def __init__(
        self,
        time: np.ndarray,
        ask_price: np.ndarray,
        ask_size: np.ndarray,
        bid_price: np.ndarray,
        bid_size: np.ndarray,
    ):
        n, m = ask_price.shape
        self.time = np.asarray(time, dtype=np.float64)
        self.ask_price = np.asarray(ask_price, dtype=np.int64)
        self.ask_size = np.asarray(ask_size, dtype=np.int64)
        self.bid_price = np.asarray(bid_price, dtype=np.int64)
        self.bid_size = np.asarray(bid_size, dtype=np.int64)
        self.n_levels = m
        # Absent levels: sentinel price or non-positive displayed size.
        self.ask_absent = (np.abs(self.ask_price) >= PRICE_SENTINEL) | (self.ask_size <= 0)
        self.bid_absent = (np.abs(self.bid_price) >= PRICE_SENTINEL) | (self.bid_size <= 0)
        lvl1_ok = ~self.ask_absent[:, 0] & ~self.bid_absent[:, 0]
        self.crossed = lvl1_ok & (self.bid_price[:, 0] >= self.ask_price[:, 0])
        # A snapshot participates in OFI/return math only when uncrossed and
        # two-sided at level 1.
        self.valid = lvl1_ok & ~self.crossed

    def __len__(self) -> int:
        return self.time.shape[0]

    def __getitem__(self, i: int) -> BookSnapshot:
        absent = np.stack([self.ask_absent[i], self.bid_absent[i]])
        return BookSnapshot(
            time=float(self.time[i]),
            event_index=i,
            ask_price=self.ask_price[i],
            ask_size=self.ask_size[i],
            bid_price=self.bid_price[i],
            bid_size=self.bid_size[i],
            absent=absent,
            crossed=bool(self.crossed[i]),
        )

    def __iter__(self):
        return (self[i] for i in range(len(self)))

    def mid_price(self) -> np.ndarray:
        """Mid-price in dollars per snapshot; NaN where the snapshot is invalid."""
        mid = (self.ask_price[:, 0] + self.bid_price[:, 0]) / 2.0 * 1e-4
        return np.where(self.valid, mid, np.nan)


def _load_matrix(path: Path | str, n_cols: int, what: str) -> np.ndarray:
    """Load a headerless comma-separated numeric matrix, naming bad rows."""
    path = Path(path)
    if not path.exists():
        raise FileNotFoundError(f"{what} file not found: {path}")
    if not path.read_text().strip():
        return np.empty((0, n_cols), dtype=np.float64)
    try:
        data = np.loadtxt(path, delimiter=",", dtype=np.float64, ndmin=2)
    except ValueError:
        # Slow pass purely to produce a row-numbered diagnostic.
        for i, line in enumerate(path.read_text().splitlines()):
            if not line.strip():
                continue
            fields = line.split(",")
            if len(fields) != n_cols:
                raise ValueError(
                    f"{what} row {i}: expected {n_cols} columns, got {len(fields)}"
                ) from None
            for f in fields:
                try:
                    float(f)
                except ValueError:
                    raise ValueError(f"{what} row {i}: non-numeric field {f!r}") from None
        raise
    if data.size == 0:
        return np.empty((0, n_cols), dtype=np.float64)
    if data.shape[1] != n_cols:
        bad = _first_bad_row(path, n_cols)
        raise ValueError(f"{what} row {bad}: expected {n_cols} columns, got {data.shape[1]}")
    return data


def _first_bad_row(path: Path, n_cols: int) -> int:
    for i, line in enumerate(path.read_text().splitlines()):
        if line.strip() and len(line.split(",")) != n_cols:
            return i
    return -1


def parse_message_file(path: Path | str) -> list[LobEvent]:
    """Parse a LOBSTER message file into events, in file order.

    Raises ValueError naming the offending row for malformed rows, field
    values outside their documented ranges, or time running backwards by
    more than TIME_REGRESSION_TOL.
    """
    data = _load_matrix(path, 6, "message")
    if data.shape[0] == 0:
        return []
    time = data[:, 0]
    rest = data[:, 1:]
    rest_int = rest.astype(np.int64)
    if not np.array_equal(rest_int, rest):
        bad = int(np.argwhere(rest_int != rest)[0][0])
        raise ValueError(f"message row {bad}: non-integer field")
    etype, size, direction = rest_int[:, 0], rest_int[:, 2], rest_int[:, 4]
    for name, ok in (
        ("event_type", (etype >= 1) & (etype <= 7)),
        ("size", size > 0),
        ("direction", np.isin(direction, (-1, 1))),
    ):
        if not ok.all():
            bad = int(np.argmin(ok))
            raise ValueError(f"message row {bad}: invalid {name}")
    dts = np.diff(time)
    if dts.size and dts.min() < -TIME_REGRESSION_TOL:
        bad = int(np.argmin(dts)) + 1
        raise ValueError(f"message row {bad}: time regression ({dts.min():.3e} s)")
    return [
        LobEvent(float(time[i]), int(rest_int[i, 0]), int(rest_int[i, 1]),
                 int(rest_int[i, 2]), int(rest_int[i, 3]), int(rest_int[i, 4]))
        for i in range(data.shape[0])
    ]


def events_to_csv(events: list[LobEvent], path: Path | str) -> None:
    """Write events in the canonical LOBSTER message format (6-decimal times)."""
    with open(path, "w") as fh:
        for e in events:
            fh.write(f"{e.time:.6f},{e.event_type},{e.order_id},{e.size},{e.price},{e.direction}\n")


def parse_orderbook_file(
    path: Path | str, n_levels: int, times: np.ndarray | None = None
) -> BookSeries:
    """Parse a LOBSTER orderbook file with ``n_levels`` levels per side.

    ``times`` are joined from the row-aligned message file; row i becomes
    the snapshot with event_index i.  Sentinel-encoded empty levels are kept
    and flagged; crossed books are flagged, not dropped.
    """
    if n_levels < 1:
        raise ValueError("n_levels must be >= 1")
    data = _load_matrix(path, 4 * n_levels, "orderbook")
    n = data.shape[0]
    mat = data.astype(np.int64)
    if not np.array_equal(mat, data):
        bad = int(np.argwhere(mat != data)[0][0])
        raise ValueError(f"orderbook row {bad}: non-integer field")
    if times is None:
        times = np.arange(n, dtype=np.float64)
    else:
        times = np.asarray(times, dtype=np.float64)
        if times.shape[0] != n:
            raise ValueError(
                f"orderbook rows ({n}) do not align with message rows ({times.shape[0]})"
            )
    series = BookSeries(
        time=times,
        ask_price=mat[:, 0::4],
        ask_size=mat[:, 1::4],
        bid_price=mat[:, 2::4],
        bid_size=mat[:, 3::4],
    )
    _check_level_ordering(series)
    return series


def _check_level_ordering(series: BookSeries) -> None:
    """Present ask prices must strictly increase in level, bids decrease."""
    for name, price, absent, sign in (
        ("ask", series.ask_price, series.ask_absent, 1),
        ("bid", series.bid_price, series.bid_absent, -1),
    ):
        if series.n_levels < 2:
            break
        diff = sign * np.diff(price, axis=1)
        both = ~absent[:, :-1] & ~absent[:, 1:]
        bad = both & (diff <= 0)
        if bad.any():
            row = int(np.argwhere(bad.any(axis=1))[0][0])
            raise ValueError(f"orderbook row {row}: {name} prices not strictly ordered")


def book_to_csv(series: BookSeries, path: Path | str) -> None:
    """Write a BookSeries in LOBSTER orderbook column order."""
    m = series.n_levels
    cols = np.empty((len(series), 4 * m), dtype=np.int64)
    cols[:, 0::4] = series.ask_price
    cols[:, 1::4] = series.ask_size
    cols[:, 2::4] = series.bid_price
    cols[:, 3::4] = series.bid_size
    with open(path, "w") as fh:
        for row in cols:
            fh.write(",".join(str(v) for v in row) + "\n")


def bucketize(
    snapshots: BookSeries | np.ndarray,
    session: tuple[float, float],
    h: float,
) -> list[BucketIndex]:
    """Partition the session into contiguous half-open buckets (t-h, t].

    A snapshot at exactly t belongs to the bucket ending at t.  Empty
    buckets are emitted with event_count 0.  ``h`` must be positive and
    divide the session length.
    """
    if h <= 0:
        raise ValueError("bucket length h must be positive")
    open_s, close_s = session
    span = close_s - open_s
    n_buckets = span / h
    if abs(n_buckets - round(n_buckets)) > 1e-9 or span <= 0:
        raise ValueError(f"bucket length {h} does not divide session length {span}")
    n_buckets = int(round(n_buckets))
    times = snapshots.time if isinstance(snapshots, BookSeries) else np.asarray(snapshots)
    if times.size > 1 and np.diff(times).min() < -TIME_REGRESSION_TOL:
        raise ValueError("snapshots must be time-sorted")
    edges = open_s + np.arange(n_buckets + 1, dtype=np.float64) * h
    # side='right' puts a snapshot at exactly the right edge into that bucket
    pos = np.searchsorted(times, edges, side="right")
    return [
        BucketIndex(
            window_start=float(edges[k]),
            window_end=float(edges[k + 1]),
            first_event=int(pos[k]),
            last_event=int(pos[k + 1]) - 1,
        )
        for k in range(n_buckets)
    ]
