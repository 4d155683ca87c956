"""Per-bucket order flow imbalance features, returns and depth scales.

All bucket quantities live on the half-open interval (t-h, t].  The
transition into a bucket's first event is compared against the last
snapshot before the bucket, so OFI is additive across any partition of a
bucket into sub-intervals.  Transitions that touch a crossed or one-sided
snapshot contribute zero; sentinel-encoded absent levels contribute zero
to both OFI and depth.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import pandas as pd

from .lob import BookSeries, BucketIndex


def transition_contributions(book: BookSeries) -> np.ndarray:
    """Signed OFI contribution of each event transition, per level.

    Row n holds the contribution of the transition (n-1 -> n); row 0 is
    zero (no predecessor).  Integer arithmetic throughout.
    """
    n = len(book)
    m = book.n_levels
    out = np.zeros((n, m), dtype=np.int64)
    if n < 2:
        return out
    bp, bq = book.bid_price, book.bid_size
    ap, aq = book.ask_price, book.ask_size
    c_bid = bq[1:] * (bp[1:] >= bp[:-1]) - bq[:-1] * (bp[1:] <= bp[:-1])
    c_ask = -aq[1:] * (ap[1:] <= ap[:-1]) + aq[:-1] * (ap[1:] >= ap[:-1])
    contrib = c_bid + c_ask
    # Per-level absence on either end kills that level's term; an invalid
    # snapshot on either end kills the whole transition.
    level_ok = ~(book.bid_absent[1:] | book.bid_absent[:-1]
                 | book.ask_absent[1:] | book.ask_absent[:-1])
    pair_ok = (book.valid[1:] & book.valid[:-1])[:, None]
    out[1:] = np.where(level_ok & pair_ok, contrib, 0)
    return out


def bucket_ofis(book: BookSeries, buckets: list[BucketIndex]) -> np.ndarray:
    """Raw OFI per bucket per level, shape (len(buckets), M)."""
    contrib = transition_contributions(book)
    csum = np.zeros((len(book) + 1, book.n_levels), dtype=np.int64)
    np.cumsum(contrib, axis=0, out=csum[1:])
    first = np.array([b.first_event for b in buckets])
    last = np.array([b.last_event for b in buckets])
    out = csum[last + 1] - csum[first]
    return out


def level_ofi(bucket: BucketIndex, book: BookSeries, m: int) -> int:
    """Raw OFI (shares) at level m (1-based) over one bucket."""
    if not 1 <= m <= book.n_levels:
        raise ValueError(f"level {m} outside [1, {book.n_levels}]")
    if bucket.event_count == 0:
        return 0
    contrib = transition_contributions(book)[:, m - 1]
    return int(contrib[bucket.first_event: bucket.last_event + 1].sum())


def bucket_depths(book: BookSeries, buckets: list[BucketIndex], m_levels: int | None = None) -> np.ndarray:
    """Depth scale Q per bucket: average total displayed size over M levels.

    Q = sum_m (1/(2*dN)) * sum_{n in bucket} (bid_size + ask_size), using
    in-bucket snapshots only.  Empty buckets yield NaN here; the feature
    builder carries the previous nonempty value forward.
    """
    m = m_levels or book.n_levels
    bid = np.where(book.bid_absent[:, :m], 0, book.bid_size[:, :m])
    ask = np.where(book.ask_absent[:, :m], 0, book.ask_size[:, :m])
    per_snap = (bid + ask).sum(axis=1)
    csum = np.concatenate([[0], np.cumsum(per_snap)])
    first = np.array([b.first_event for b in buckets])
    last = np.array([b.last_event for b in buckets])
    count = last - first + 1
    total = csum[last + 1] - csum[first]
    with np.errstate(divide="ignore", invalid="ignore"):
        q = total / (2.0 * count)
    return np.where(count > 0, q, np.nan)


def depth_scale(bucket: BucketIndex, book: BookSeries, m_levels: int | None = None) -> float:
    """Q over one bucket; NaN when the bucket is empty."""
    return float(bucket_depths(book, [bucket], m_levels)[0])


def normalize_ofi(raw: float | np.ndarray, q: float | np.ndarray) -> float | np.ndarray:
    """Dimensionless OFI = raw / Q; NaN propagated when Q is not positive."""
    q_arr = np.asarray(q, dtype=np.float64)
    with np.errstate(divide="ignore", invalid="ignore"):
        out = np.asarray(raw, dtype=np.float64) / q_arr
    out = np.where(q_arr > 0, out, np.nan)
    return float(out) if np.isscalar(raw) or np.ndim(raw) == 0 else out


def log_return(p_t: float, p_prev: float) -> float:
    """ln(p_t / p_prev); NaN for nonpositive or missing prices."""
    if not (p_t > 0 and p_prev > 0):
        return float("nan")
    return float(np.log(p_t / p_prev))


def realized_vol(prior_days: list[np.ndarray]) -> tuple[float, int]:
    """Average over prior days of the sample std of that day's 1-minute returns.

    Each entry is one day's minute-return series for the clock window
    [t - 30min, t]; NaNs are dropped.  Returns (sigma, days_used); sigma is
    NaN when no day has at least two usable returns.
    """
    stds = []
    for day in prior_days:
        vals = np.asarray(day, dtype=np.float64)
        vals = vals[np.isfinite(vals)]
        if vals.size >= 2:
            stds.append(vals.std(ddof=1))
    if not stds:
        return float("nan"), 0
    return float(np.mean(stds)), len(stds)


def _last_valid_index(book: BookSeries) -> np.ndarray:
    """lastvalid[i] = largest j <= i with book.valid[j], else -1."""
    idx = np.where(book.valid, np.arange(len(book)), -1)
    return np.maximum.accumulate(idx) if len(book) else idx


def mid_at_times(book: BookSeries, times: np.ndarray) -> np.ndarray:
    """Mid-price (dollars) of the last valid snapshot at or before each time."""
    times = np.asarray(times, dtype=np.float64)
    if len(book) == 0:
        return np.full(times.shape, np.nan)
    pos = np.searchsorted(book.time, times, side="right") - 1
    lastvalid = _last_valid_index(book)
    j = np.where(pos >= 0, lastvalid[np.clip(pos, 0, None)], -1)
    mid = (book.ask_price[:, 0] + book.bid_price[:, 0]) / 2.0 * 1e-4
    return np.where(j >= 0, mid[np.clip(j, 0, None)], np.nan)


def minute_returns(book: BookSeries, day_bounds: tuple[float, float]) -> tuple[np.ndarray, np.ndarray]:
    """1-minute log returns on the minute grid over [open, close].

    Returns (minute_end_times, returns); entry j is the return over
    (edge_j, edge_{j+1}].
    """
    open_s, close_s = day_bounds
    n_min = int(round((close_s - open_s) / 60.0))
    edges = open_s + 60.0 * np.arange(n_min + 1)
    mids = mid_at_times(book, edges)
    with np.errstate(divide="ignore", invalid="ignore"):
        rets = np.log(mids[1:] / mids[:-1])
    return edges[1:], rets


def sigma_for_buckets(
    prior_day_minutes: list[tuple[np.ndarray, np.ndarray]],
    bucket_ends: np.ndarray,
    lookback_s: float = 1800.0,
) -> tuple[np.ndarray, np.ndarray]:
    """Volatility sigma_t per bucket end from prior days' minute returns.

    For each bucket end t, averages across prior days the sample std of
    that day's minute returns inside the clock window [t - lookback, t].
    Returns (sigma, days_used) arrays.
    """
    bucket_ends = np.asarray(bucket_ends, dtype=np.float64)
    sig = np.empty(bucket_ends.shape)
    used = np.empty(bucket_ends.shape, dtype=np.int64)
    for k, t in enumerate(bucket_ends):
        windows = []
        for times, rets in prior_day_minutes:
            sel = (times >= t - lookback_s) & (times <= t)
            windows.append(rets[sel])
        sig[k], used[k] = realized_vol(windows)
    return sig, used


@dataclass
class DayFeatures:
    """Per-stock per-day feature panel on a fixed bucket grid."""

    stock: str
    day: str
    t: np.ndarray                   # bucket end times (seconds after midnight)
    h: float                        # bucket length in seconds
    ofi_raw: np.ndarray             # (K, M) shares
    q: np.ndarray                   # (K,) depth scale
    ofi: np.ndarray                 # (K, M) normalized
    ofi_int: np.ndarray             # (K,) integrated OFI, NaN until filled
    mid: np.ndarray                 # (K,) dollars at bucket end
    ret: np.ndarray                 # (K,) raw log return over the bucket
    nret: np.ndarray                # (K,) normalized return
    spread: np.ndarray              # (K,) relative bid-ask spread
    sigma: np.ndarray               # (K,) minutely-return volatility
    sigma_days: np.ndarray          # (K,) prior days used for sigma
    empty: np.ndarray               # (K,) bucket had no events
    valid: np.ndarray               # (K,) row usable by the models

    @property
    def n_levels(self) -> int:
        return self.ofi_raw.shape[1]

    def to_frame(self) -> pd.DataFrame:
        m = self.n_levels
        data = {"stock": self.stock, "t": self.t}
        for j in range(m):
            data[f"ofi{j + 1}"] = self.ofi[:, j]
        data["ofiI"] = self.ofi_int
        data["Q"] = self.q
        data["R"] = self.ret
        data["r"] = self.nret
        data["mid"] = self.mid
        data["spread"] = self.spread
        data["sigma"] = self.sigma
        data["valid"] = self.valid.astype(int)
        return pd.DataFrame(data)


def compute_day_features(
    book: BookSeries,
    buckets: list[BucketIndex],
    stock: str = "",
    day: str = "",
    sigma: np.ndarray | None = None,
    sigma_days: np.ndarray | None = None,
) -> DayFeatures:
    """Bucket OFIs, depth scales, mid-price returns and spreads for one day.

    ``sigma`` (per bucket end) comes from sigma_for_buckets over prior
    days; rows without it keep raw returns but are flagged invalid for
    normalized-return models.
    """
    k = len(buckets)
    m = book.n_levels
    h = buckets[0].window_end - buckets[0].window_start if k else 0.0
    ends = np.array([b.window_end for b in buckets])
    starts = np.array([b.window_start for b in buckets])
    counts = np.array([b.event_count for b in buckets])

    ofi_raw = bucket_ofis(book, buckets).astype(np.float64)
    q = bucket_depths(book, buckets)
    # Empty buckets: OFI already 0; carry Q forward so windows keep full length.
    q = pd.Series(q).ffill().to_numpy()

    mids_at_edges = mid_at_times(book, np.concatenate([[starts[0]], ends]))
    mid = mids_at_edges[1:]
    with np.errstate(divide="ignore", invalid="ignore"):
        ret = np.log(mids_at_edges[1:] / mids_at_edges[:-1])

    # Relative spread from the last valid snapshot at or before the bucket end.
    lastvalid = _last_valid_index(book)
    pos = np.searchsorted(book.time, ends, side="right") - 1
    j = np.where(pos >= 0, lastvalid[np.clip(pos, 0, None)], -1)
    with np.errstate(divide="ignore", invalid="ignore"):
        rel = (book.ask_price[:, 0] - book.bid_price[:, 0]) / (
            (book.ask_price[:, 0] + book.bid_price[:, 0]) / 2.0
        )
    spread = np.where(j >= 0, rel[np.clip(j, 0, None)], np.nan)

    if sigma is None:
        sigma = np.full(k, np.nan)
        sigma_days = np.zeros(k, dtype=np.int64)
    if sigma_days is None:
        sigma_days = np.where(np.isfinite(sigma), 1, 0)

    h_minutes = h / 60.0
    with np.errstate(divide="ignore", invalid="ignore"):
        nret = ret / (sigma * np.sqrt(h_minutes))
    nret = np.where(np.isfinite(sigma) & (sigma > 0), nret, np.nan)

    ofi = normalize_ofi(ofi_raw, q[:, None])
    valid = (
        np.isfinite(q) & (q > 0)
        & np.isfinite(mid) & np.isfinite(ret)
        & np.isfinite(nret)
    )
    return DayFeatures(
        stock=stock, day=day, t=ends, h=h,
        ofi_raw=ofi_raw, q=q, ofi=ofi,
        ofi_int=np.full(k, np.nan),
        mid=mid, ret=ret, nret=nret, spread=spread,
        sigma=np.asarray(sigma, dtype=np.float64),
        sigma_days=np.asarray(sigma_days, dtype=np.int64),
        empty=counts == 0, valid=valid,
    )


@dataclass
class FeaturePanel:
    """Features for a universe: one DayFeatures per (stock, day)."""

    days: dict[tuple[str, str], DayFeatures] = field(default_factory=dict)

    def add(self, f: DayFeatures) -> None:
        self.days[(f.stock, f.day)] = f

    @property
    def stocks(self) -> list[str]:
        return sorted({s for s, _ in self.days})

    @property
    def dates(self) -> list[str]:
        return sorted({d for _, d in self.days})

    def get(self, stock: str, day: str) -> DayFeatures:
        return self.days[(stock, day)]

    def day_frame(self, day: str) -> pd.DataFrame:
        parts = [self.days[(s, d)].to_frame() for (s, d) in sorted(self.days) if d == day]
        return pd.concat(parts, ignore_index=True)

    def write_csvs(self, out_dir, prefix: str = "features") -> list:
        from pathlib import Path

        out_dir = Path(out_dir)
        paths = []
        for day in self.dates:
            path = out_dir / f"{prefix}_{day}.csv"
            self.day_frame(day).to_csv(path, index=False, float_format="%.12g")
            paths.append(path)
        return paths


def read_feature_csvs(paths) -> FeaturePanel:
    """Re-ingest feature CSVs written by FeaturePanel.write_csvs."""
    panel = FeaturePanel()
    for path in paths:
        day = str(path).rsplit("_", 1)[-1].removesuffix(".csv")
        frame = pd.read_csv(path)
        level_cols = [c for c in frame.columns if c.startswith("ofi") and c[3:].isdigit()]
        m = len(level_cols)
        for stock, grp in frame.groupby("stock", sort=True):
            k = len(grp)
            t = grp["t"].to_numpy(dtype=np.float64)
            h = float(np.median(np.diff(t))) if k > 1 else 0.0
            ofi = grp[[f"ofi{j + 1}" for j in range(m)]].to_numpy(dtype=np.float64)
            q = grp["Q"].to_numpy(dtype=np.float64)
            panel.add(DayFeatures(
                stock=str(stock), day=day, t=t, h=h,
                ofi_raw=ofi * q[:, None], q=q, ofi=ofi,
                ofi_int=grp["ofiI"].to_numpy(dtype=np.float64),
                mid=grp["mid"].to_numpy(dtype=np.float64),
                ret=grp["R"].to_numpy(dtype=np.float64),
                nret=grp["r"].to_numpy(dtype=np.float64),
                spread=grp["spread"].to_numpy(dtype=np.float64),
                sigma=grp["sigma"].to_numpy(dtype=np.float64),
                sigma_days=np.where(np.isfinite(grp["sigma"].to_numpy(dtype=np.float64)), 1, 0),
                empty=np.zeros(k, dtype=bool),
                valid=grp["valid"].to_numpy() != 0,
            ))
    return panel
