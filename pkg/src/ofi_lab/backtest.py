"""Forecast-driven portfolios, per-minute PnL, and OFI-sign holding-period
PnL profiles.

Both portfolio rules are self-financing: whenever any stock is selected the
absolute weights sum to exactly one.  PnL uses simple returns derived from
log returns, PnL = sum_i w_i * (exp(R_i) - 1), reported in basis points and
gross of trading costs.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import pandas as pd


def forecast_implied_weights(
    forecasts: np.ndarray,
    spreads: np.ndarray,
    forecast_vol: np.ndarray,
) -> np.ndarray:
    """Spread-filtered, dispersion-scaled capital fractions.

    A stock participates only when |forecast| exceeds its relative spread;
    participating weights are forecast / forecast_vol, normalized by the
    summed absolute scores.  Stocks with non-positive or missing dispersion
    are excluded.  If nothing passes the filter all weights are zero.
    """
    f = np.asarray(forecasts, dtype=np.float64)
    sprd = np.asarray(spreads, dtype=np.float64)
    sig = np.asarray(forecast_vol, dtype=np.float64)
    passing = np.isfinite(f) & np.isfinite(sprd) & (np.abs(f) > sprd)
    passing &= np.isfinite(sig) & (sig > 0)
    w = np.zeros_like(f)
    if not passing.any():
        return w
    score = np.where(passing, f / np.where(sig > 0, sig, 1.0), 0.0)
    denom = np.abs(score).sum()
    if denom <= 0:
        return w
    return score / denom


def decile_thresholds(forecasts: np.ndarray) -> tuple[float, float]:
    """Empirical-CDF decile thresholds d(1), d(9).

    d(k) is the smallest data value at which the empirical CDF reaches
    k/10, i.e. the ceil(k*N/10)-th order statistic.
    """
    f = np.sort(np.asarray(forecasts, dtype=np.float64))
    n = f.shape[0]
    d1 = f[int(np.ceil(0.1 * n)) - 1]
    d9 = f[int(np.ceil(0.9 * n)) - 1]
    return float(d1), float(d9)


def long_short_weights(forecasts: np.ndarray, symmetric: bool = False) -> np.ndarray:
    """Decile long-short weights: long above d(9), short below d(1).

    The strict inequalities follow the threshold definitions literally, so
    small or tied cross-sections can select asymmetric (or empty) sets; the
    selected weights are normalized by the total selected count.
    ``symmetric=True`` swaps in a rank-based variant that always takes the
    top and bottom ceil(N/10) names (study aid, off by default).
    """
    f = np.asarray(forecasts, dtype=np.float64)
    w = np.zeros_like(f)
    finite = np.isfinite(f)
    if finite.sum() == 0:
        return w
    if symmetric:
        idx = np.flatnonzero(finite)
        if np.ptp(f[idx]) == 0:
            return w
        k = max(1, int(np.ceil(0.1 * idx.size)))
        order = idx[np.argsort(f[idx], kind="stable")]
        long = order[-k:]
        short = order[:k]
        w[long] = 1.0 / (2 * k)
        w[short] = -1.0 / (2 * k)
        return w
    d1, d9 = decile_thresholds(f[finite])
    long = finite & (f > d9)
    short = finite & (f < d1)
    count = int(long.sum() + short.sum())
    if count == 0:
        return w
    w[long] = 1.0 / count
    w[short] = -1.0 / count
    return w


def pnl(weights: np.ndarray, next_log_returns: np.ndarray) -> float:
    """Per-minute portfolio PnL (dimensionless); multiply by 1e4 for bps."""
    w = np.asarray(weights, dtype=np.float64)
    r = np.asarray(next_log_returns, dtype=np.float64)
    gains = np.where(w != 0, np.expm1(np.where(np.isfinite(r), r, 0.0)), 0.0)
    return float((w * gains).sum())


@dataclass
class PortfolioRecord:
    """One strategy-minute: weights, inputs, and the realized outcome."""

    day: str
    minute: float
    strategy: str
    model: str
    weights: np.ndarray
    forecasts: np.ndarray
    forecast_vol: np.ndarray
    spreads: np.ndarray
    pnl: float

    @property
    def n_selected(self) -> int:
        return int(np.count_nonzero(self.weights))


def backtest_records(
    forecasts: pd.DataFrame,
    trailing_minutes: float = 30.0,
    strategies: tuple[str, ...] = ("forecast_implied", "long_short"),
) -> list[PortfolioRecord]:
    """Turn a forward model's forecast frame into per-minute portfolios.

    ``forecasts`` columns: model, stock, day, t, forecast, realized, spread
    (one row per stock-minute; ``realized`` is the next-minute log return).
    The forecast dispersion for the implied strategy is the sample std of
    the stock's own forecasts over the trailing window; minutes without a
    full trailing window produce no implied positions.
    """
    records = []
    for (model, day), grp in forecasts.groupby(["model", "day"], sort=True):
        pivot_f = grp.pivot_table(index="t", columns="stock", values="forecast", sort=True)
        pivot_r = grp.pivot_table(index="t", columns="stock", values="realized", sort=True)
        pivot_s = grp.pivot_table(index="t", columns="stock", values="spread", sort=True)
        times = pivot_f.index.to_numpy()
        f_mat = pivot_f.to_numpy()
        r_mat = pivot_r.reindex(pivot_f.index).to_numpy()
        s_mat = pivot_s.reindex(pivot_f.index).to_numpy()
        for ti, t in enumerate(times):
            trailing = (times < t) & (times >= t - trailing_minutes * 60.0)
            sig = np.full(f_mat.shape[1], np.nan)
            if trailing.sum() >= 2 and times[trailing].min() <= t - trailing_minutes * 60.0 + 90.0:
                block = f_mat[trailing]
                with np.errstate(invalid="ignore"):
                    sig = np.nanstd(block, axis=0, ddof=1)
            for strategy in strategies:
                if strategy == "forecast_implied":
                    w = forecast_implied_weights(f_mat[ti], s_mat[ti], sig)
                elif strategy == "long_short":
                    w = long_short_weights(f_mat[ti])
                else:
                    raise ValueError(f"unknown strategy {strategy}")
                records.append(PortfolioRecord(
                    day=day, minute=float(t), strategy=strategy, model=model,
                    weights=w, forecasts=f_mat[ti], forecast_vol=sig,
                    spreads=s_mat[ti], pnl=pnl(w, r_mat[ti]),
                ))
    return records


def run_backtest(
    forecasts: pd.DataFrame,
    trailing_minutes: float = 30.0,
    strategies: tuple[str, ...] = ("forecast_implied", "long_short"),
) -> pd.DataFrame:
    """Per-minute strategy PnL frame (bps) from a forward forecast frame."""
    return pd.DataFrame([
        {"model": r.model, "day": r.day, "t": r.minute, "strategy": r.strategy,
         "pnl_bps": r.pnl * 1e4, "n_selected": r.n_selected}
        for r in backtest_records(forecasts, trailing_minutes, strategies)
    ])


@dataclass
class HorizonPnl:
    """Average PnL of holding sign(OFI) positions for p buckets."""

    holding: int
    pnl: float                 # mean over eligible buckets, dimensionless
    n_buckets: int             # N_p = number of eligible entry buckets
    t_max: float               # last eligible entry time

    @property
    def pnl_bps(self) -> float:
        return self.pnl * 1e4


def ofi_sign_pnl(ofi1: np.ndarray, returns: np.ndarray, p: int,
                 times: np.ndarray | None = None) -> HorizonPnl:
    """Daily average of sign(ofi_t) * sum of the next p returns.

    Entry buckets run through the last one with p future returns available,
    so N_p = T - p.  sign(0) takes no position but still counts in N_p.
    """
    ofi1 = np.asarray(ofi1, dtype=np.float64)
    returns = np.asarray(returns, dtype=np.float64)
    t = ofi1.shape[0]
    if returns.shape[0] != t:
        raise ValueError("ofi and return series must align")
    if not 1 <= p < t:
        raise ValueError(f"holding period {p} exceeds the session ({t} buckets)")
    n_p = t - p
    csum = np.concatenate([[0.0], np.cumsum(np.where(np.isfinite(returns), returns, 0.0))])
    fwd = csum[p + 1:] - csum[1: t - p + 1]       # sum of returns t+1 .. t+p
    per_entry = np.sign(ofi1[:n_p]) * fwd
    t_max = float(times[n_p - 1]) if times is not None else float(n_p - 1)
    return HorizonPnl(holding=p, pnl=float(per_entry.mean()), n_buckets=n_p, t_max=t_max)


def horizon_pnl_profile(panel_days, p_max: int = 60) -> pd.DataFrame:
    """PnL-by-holding-period profile averaged across stock-days.

    ``panel_days``: iterable of (ofi1, returns, times) day series on a
    minutely grid over the full trading day.
    """
    series = list(panel_days)
    rows = []
    for p in range(1, p_max + 1):
        vals = []
        for ofi1, rets, times in series:
            if p < len(ofi1):
                vals.append(ofi_sign_pnl(ofi1, rets, p, times).pnl)
        if vals:
            rows.append({"holding": p, "pnl_bps": float(np.mean(vals)) * 1e4,
                         "n_days": len(vals)})
    return pd.DataFrame(rows)
