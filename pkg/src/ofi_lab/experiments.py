"""Rolling-window estimation of the price-impact, cross-impact and
forecasting model families, plus the multi-horizon impact model and
characteristic-quartile reporting.

Families (contemporaneous target: normalized return r; forward target:
next-bucket raw log return R):

==============  ========================================  =======
family          features                                  solver
==============  ========================================  =======
pi              own normalized OFIs, levels 1..m          OLS
pi_int          own integrated OFI                        OLS
ci              every stock's best-level OFI              LASSO-CV
ci_int          every stock's integrated OFI              LASSO-CV
ci_deep         every stock's OFIs at all levels          LASSO-CV
pi_common       OFI common factor + own residual          OLS
ci_common       factor + own and cross residuals          LASSO-CV
f_pi            own best-level OFI, lags 0..2             OLS
f_ci            all stocks' best-level OFI, lags 0..2     LASSO-CV
f_pi_int        own integrated OFI, lags 0..2             OLS
f_ci_int        all stocks' integrated OFI, lags 0..2     LASSO-CV
f_ar            own return, lags 0..2                     OLS
f_cr            all stocks' returns, lags 0..2            LASSO-CV
f_pi_deep       own OFIs at all levels, lags 0..2         LASSO-CV
==============  ========================================  =======

Each window fits on the trailing ``window_minutes`` and is evaluated out of
sample on the following ``cadence_minutes`` span; windows advance by the
cadence.  With the default 30/30 setup on a 10:00-15:30 session this yields
exactly 10 regressions per stock-day; a 1-minute cadence reproduces the
high-frequency refit protocol on the same panel.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import pandas as pd

from .factors import common_factor_decompose, fit_pca, integrated_ofi
from .features import FeaturePanel
from .regression import DesignMatrix, LassoConfig, delta_r2_test, lasso_cv, ols_fit, oos_r2

CONTEMPORANEOUS_FAMILIES = ("pi", "pi_int", "ci", "ci_int", "ci_deep")
COMMON_FACTOR_FAMILIES = ("pi_common", "ci_common")
FORWARD_FAMILIES = ("f_pi", "f_ci", "f_pi_int", "f_ci_int", "f_ar", "f_cr", "f_pi_deep")

_LASSO_DEFAULT = ("ci", "ci_int", "ci_deep", "ci_common", "f_ci", "f_ci_int", "f_cr", "f_pi_deep")


@dataclass
class ModelSpec:
    family: str
    levels: int = 1                 # pi only: include OFI levels 1..levels
    solver: str = ""                # "" = family default, else "ols" | "lasso"
    window_minutes: float = 30.0
    cadence_minutes: float = 30.0
    lags: int = 3                   # forward families: lags 0..lags-1
    lasso: LassoConfig = field(default_factory=LassoConfig)

    def resolved_solver(self) -> str:
        if self.solver:
            return self.solver
        return "lasso" if self.family in _LASSO_DEFAULT else "ols"

    def display(self) -> str:
        names = {
            "pi": f"PI[{self.levels}]", "pi_int": "PI[I]",
            "ci": "CI[1]", "ci_int": "CI[I]", "ci_deep": "CI[10]",
            "pi_common": "PI[M]", "ci_common": "CI[M]",
            "f_pi": "F-PI[1]", "f_ci": "F-CI[1]",
            "f_pi_int": "F-PI[I]", "f_ci_int": "F-CI[I]",
            "f_ar": "F-AR", "f_cr": "F-CR", "f_pi_deep": "F-PI[10]",
        }
        return names[self.family]


@dataclass
class WindowResult:
    model: str
    stock: str
    day: str
    window_start: float
    is_r2: float                    # adjusted R^2 on the fit window
    is_r2_unadj: float
    oos_r2: float
    lam: float | None
    nnz: int
    beta: np.ndarray
    labels: list[str]


@dataclass
class ExperimentReport:
    model: str
    spec: ModelSpec
    results: list[WindowResult] = field(default_factory=list)
    skipped: list[tuple[str, str, float, str]] = field(default_factory=list)
    forecasts: pd.DataFrame | None = None   # forward families only
    meta: dict = field(default_factory=dict)

    def frame(self) -> pd.DataFrame:
        return pd.DataFrame([
            {"model": r.model, "stock": r.stock, "day": r.day,
             "window_start": r.window_start, "is_r2": r.is_r2,
             "oos_r2": r.oos_r2, "lambda": np.nan if r.lam is None else r.lam,
             "nnz": r.nnz}
            for r in self.results
        ])

    def mean_is(self) -> float:
        vals = [r.is_r2 for r in self.results if np.isfinite(r.is_r2)]
        return float(np.mean(vals)) if vals else float("nan")

    def mean_oos(self) -> float:
        vals = [r.oos_r2 for r in self.results if np.isfinite(r.oos_r2)]
        return float(np.mean(vals)) if vals else float("nan")

    def r2_by_key(self, kind: str = "oos") -> dict[tuple[str, str, float], float]:
        return {
            (r.stock, r.day, r.window_start): (r.oos_r2 if kind == "oos" else r.is_r2)
            for r in self.results
        }


def paired_r2(a: ExperimentReport, b: ExperimentReport, kind: str = "oos") -> tuple[float, float, int]:
    """Aligned Delta R^2 (b - a) and its one-sided p-value.

    Only (stock, day, window) keys present in both reports with finite
    values on both sides enter the comparison.
    """
    ka, kb = a.r2_by_key(kind), b.r2_by_key(kind)
    keys = sorted(
        k for k in ka.keys() & kb.keys()
        if np.isfinite(ka[k]) and np.isfinite(kb[k])
    )
    if len(keys) < 2:
        return float("nan"), float("nan"), len(keys)
    xa = np.array([ka[k] for k in keys])
    xb = np.array([kb[k] for k in keys])
    mean, p = delta_r2_test(xa, xb)
    return mean, p, len(keys)


# ---------------------------------------------------------------------------
# panel plumbing
# ---------------------------------------------------------------------------


@dataclass
class _DayArrays:
    stocks: list[str]
    t: np.ndarray          # (K,) bucket ends
    h: float
    ofi_levels: np.ndarray  # (N, K, M) normalized OFIs
    ofi_int: np.ndarray     # (N, K)
    nret: np.ndarray        # (N, K)
    ret: np.ndarray         # (N, K)
    spread: np.ndarray      # (N, K)
    valid: np.ndarray       # (N, K)


def _day_arrays(panel: FeaturePanel, day: str) -> _DayArrays:
    stocks = sorted(s for s, d in panel.days if d == day)
    feats = [panel.get(s, day) for s in stocks]
    t = feats[0].t
    for f in feats[1:]:
        if not np.array_equal(f.t, t):
            raise ValueError(f"stocks are on different bucket grids on {day}")
    return _DayArrays(
        stocks=stocks, t=t, h=feats[0].h,
        ofi_levels=np.stack([f.ofi for f in feats]),
        ofi_int=np.stack([f.ofi_int for f in feats]),
        nret=np.stack([f.nret for f in feats]),
        ret=np.stack([f.ret for f in feats]),
        spread=np.stack([f.spread for f in feats]),
        valid=np.stack([f.valid for f in feats]),
    )


def fill_integrated_ofi(panel: FeaturePanel, window_minutes: float = 30.0) -> None:
    """Fill each row's integrated OFI from the preceding block's PCA.

    Buckets are grouped into blocks of ``window_minutes``; the first
    principal vector fitted on block b-1's multi-level OFI rows transforms
    every vector in block b.  Rows in the first block, or behind a
    degenerate PCA, stay NaN.
    """
    for (stock, day), f in panel.days.items():
        k = f.t.shape[0]
        if k == 0:
            continue
        per_block = int(round(window_minutes * 60.0 / f.h))
        block = ((f.t - f.t[0]) / f.h).round().astype(int) // per_block
        out = np.full(k, np.nan)
        for b in range(1, block.max() + 1):
            prev = (block == b - 1) & f.valid & np.isfinite(f.ofi).all(axis=1)
            cur = block == b
            rows = f.ofi[prev]
            if rows.shape[0] < 2:
                continue
            pca = fit_pca(rows)
            if pca.degenerate or np.abs(pca.components[0]).sum() <= 0:
                continue
            out[cur] = integrated_ofi(pca.components[0], f.ofi[cur])
        f.ofi_int = out


def _windows(n_buckets: int, h: float, window_minutes: float, cadence_minutes: float):
    nw = int(round(window_minutes * 60.0 / h))
    nc = int(round(cadence_minutes * 60.0 / h))
    if nw < 2 or nc < 1:
        raise ValueError("window/cadence too short for the bucket grid")
    i0 = 0
    while i0 + nw + nc <= n_buckets:
        yield i0, slice(i0, i0 + nw), slice(i0 + nw, i0 + nw + nc)
        i0 += nc


# ---------------------------------------------------------------------------
# contemporaneous families
# ---------------------------------------------------------------------------


def _contemporaneous_design(da: _DayArrays, spec: ModelSpec, si: int,
                            rows: np.ndarray) -> DesignMatrix | None:
    """Design matrix for one stock's contemporaneous fit on selected rows."""
    s = da.stocks[si]
    if spec.family == "pi":
        x = da.ofi_levels[si][rows, : spec.levels]
        labels = [f"{s}:ofi{m + 1}" for m in range(spec.levels)]
    elif spec.family == "pi_int":
        x = da.ofi_int[si][rows, None]
        labels = [f"{s}:ofiI"]
    elif spec.family == "ci":
        x = da.ofi_levels[:, rows, 0].T
        labels = [f"{o}:ofi1" for o in da.stocks]
    elif spec.family == "ci_int":
        x = da.ofi_int[:, rows].T
        labels = [f"{o}:ofiI" for o in da.stocks]
    elif spec.family == "ci_deep":
        n, _, m = da.ofi_levels.shape
        x = da.ofi_levels[:, rows, :].transpose(1, 0, 2).reshape(len(rows), n * m)
        labels = [f"{o}:ofi{j + 1}" for o in da.stocks for j in range(m)]
    else:
        raise ValueError(f"not a contemporaneous family: {spec.family}")
    y = da.nret[si][rows]
    if not np.isfinite(x).all() or not np.isfinite(y).all():
        return None
    return DesignMatrix(x=x, y=y, labels=labels)


def _fit(dm: DesignMatrix, spec: ModelSpec, name: str):
    if spec.resolved_solver() == "lasso":
        _, fit = lasso_cv(dm, spec.lasso, model=name)
        return fit
    return ols_fit(dm, model=name)


def run_contemporaneous(panel: FeaturePanel, spec: ModelSpec) -> ExperimentReport:
    """Fit one contemporaneous family over every (stock, day, window)."""
    if spec.family not in CONTEMPORANEOUS_FAMILIES:
        raise ValueError(f"unknown contemporaneous family {spec.family}")
    name = spec.display()
    report = ExperimentReport(model=name, spec=spec)
    needs_int = spec.family in ("pi_int", "ci_int")
    for day in panel.dates:
        da = _day_arrays(panel, day)
        for i0, fit_sl, ev_sl in _windows(da.t.shape[0], da.h, spec.window_minutes, spec.cadence_minutes):
            wstart = float(da.t[i0] - da.h)
            cross = spec.family.startswith("ci")
            base_ok = da.valid.all(axis=0) if cross else None
            for si, stock in enumerate(da.stocks):
                ok = da.valid[si].copy() if not cross else base_ok.copy()
                if needs_int:
                    ok &= np.isfinite(da.ofi_int).all(axis=0) if cross else np.isfinite(da.ofi_int[si])
                fit_rows = np.flatnonzero(ok[fit_sl]) + fit_sl.start
                ev_rows = np.flatnonzero(ok[ev_sl]) + ev_sl.start
                min_rows = max(8, (spec.levels if spec.family == "pi" else 1) + 2)
                if fit_rows.size < min_rows:
                    report.skipped.append((stock, day, wstart, "insufficient valid rows"))
                    continue
                dm = _contemporaneous_design(da, spec, si, fit_rows)
                if dm is None:
                    report.skipped.append((stock, day, wstart, "non-finite features"))
                    continue
                try:
                    fit = _fit(dm, spec, name)
                except (ValueError, RuntimeError) as exc:
                    report.skipped.append((stock, day, wstart, str(exc)))
                    continue
                oos = float("nan")
                if ev_rows.size >= 2:
                    dm_ev = _contemporaneous_design(da, spec, si, ev_rows)
                    if dm_ev is not None:
                        oos = oos_r2(dm_ev.y, fit.predict(dm_ev.x))
                report.results.append(WindowResult(
                    model=name, stock=stock, day=day, window_start=wstart,
                    is_r2=fit.adj_r2, is_r2_unadj=fit.r2, oos_r2=oos,
                    lam=fit.lam, nnz=fit.nnz, beta=fit.beta, labels=fit.labels,
                ))
    return report


# ---------------------------------------------------------------------------
# common-factor families
# ---------------------------------------------------------------------------


def run_common_factor(panel: FeaturePanel, spec: ModelSpec) -> ExperimentReport:
    """Factor-plus-residual regressions on best-level OFIs."""
    if spec.family not in COMMON_FACTOR_FAMILIES:
        raise ValueError(f"unknown common-factor family {spec.family}")
    name = spec.display()
    report = ExperimentReport(model=name, spec=spec)
    for day in panel.dates:
        da = _day_arrays(panel, day)
        if len(da.stocks) < 2:
            raise ValueError("common-factor models need at least 2 stocks")
        ok_all = da.valid.all(axis=0)
        for i0, fit_sl, ev_sl in _windows(da.t.shape[0], da.h, spec.window_minutes, spec.cadence_minutes):
            wstart = float(da.t[i0] - da.h)
            fit_rows = np.flatnonzero(ok_all[fit_sl]) + fit_sl.start
            ev_rows = np.flatnonzero(ok_all[ev_sl]) + ev_sl.start
            if fit_rows.size < 8:
                report.skipped.append(("*", day, wstart, "insufficient valid rows"))
                continue
            ofi1 = da.ofi_levels[:, fit_rows, 0]
            try:
                cf = common_factor_decompose(ofi1)
            except ValueError as exc:
                report.skipped.append(("*", day, wstart, f"degenerate factor: {exc}"))
                continue
            f_oos, tau_oos = (None, None)
            if ev_rows.size >= 2:
                f_oos, tau_oos = cf.transform(da.ofi_levels[:, ev_rows, 0])
            for si, stock in enumerate(da.stocks):
                if spec.family == "pi_common":
                    x = np.column_stack([cf.factor, cf.residuals[si]])
                    labels = ["factor", f"{stock}:tau"]
                else:
                    others = [j for j in range(len(da.stocks)) if j != si]
                    x = np.column_stack([cf.factor, cf.residuals[si], cf.residuals[others].T])
                    labels = (["factor", f"{stock}:tau"]
                              + [f"{da.stocks[j]}:tau" for j in others])
                y = da.nret[si][fit_rows]
                try:
                    fit = _fit(DesignMatrix(x=x, y=y, labels=labels), spec, name)
                except (ValueError, RuntimeError) as exc:
                    report.skipped.append((stock, day, wstart, str(exc)))
                    continue
                oos = float("nan")
                if f_oos is not None:
                    if spec.family == "pi_common":
                        x_ev = np.column_stack([f_oos, tau_oos[si]])
                    else:
                        x_ev = np.column_stack([f_oos, tau_oos[si], tau_oos[others].T])
                    oos = oos_r2(da.nret[si][ev_rows], fit.predict(x_ev))
                report.results.append(WindowResult(
                    model=name, stock=stock, day=day, window_start=wstart,
                    is_r2=fit.adj_r2, is_r2_unadj=fit.r2, oos_r2=oos,
                    lam=fit.lam, nnz=fit.nnz, beta=fit.beta, labels=fit.labels,
                ))
    return report


# ---------------------------------------------------------------------------
# forward-looking families
# ---------------------------------------------------------------------------


def _forward_features(da: _DayArrays, spec: ModelSpec, si: int) -> tuple[np.ndarray, list[str]]:
    """Feature matrix (K, p) for a forward family; row t uses lags t, t-1, ..."""
    lags = spec.lags
    if spec.family == "f_pi":
        base, labels = da.ofi_levels[si][:, :1], [f"{da.stocks[si]}:ofi1"]
    elif spec.family == "f_pi_int":
        base, labels = da.ofi_int[si][:, None], [f"{da.stocks[si]}:ofiI"]
    elif spec.family == "f_ar":
        base, labels = da.ret[si][:, None], [f"{da.stocks[si]}:R"]
    elif spec.family == "f_pi_deep":
        m = da.ofi_levels.shape[2]
        base = da.ofi_levels[si]
        labels = [f"{da.stocks[si]}:ofi{j + 1}" for j in range(m)]
    elif spec.family == "f_ci":
        base = da.ofi_levels[:, :, 0].T
        labels = [f"{o}:ofi1" for o in da.stocks]
    elif spec.family == "f_ci_int":
        base = da.ofi_int.T
        labels = [f"{o}:ofiI" for o in da.stocks]
    elif spec.family == "f_cr":
        base = da.ret.T
        labels = [f"{o}:R" for o in da.stocks]
    else:
        raise ValueError(f"unknown forward family {spec.family}")
    k, p0 = base.shape
    cols = []
    lab = []
    for lag in range(lags):
        shifted = np.full((k, p0), np.nan)
        shifted[lag:] = base[: k - lag]
        cols.append(shifted)
        lab.extend(f"{name}:lag{lag}" for name in labels)
    return np.concatenate(cols, axis=1), lab


def run_forward(panel: FeaturePanel, spec: ModelSpec) -> ExperimentReport:
    """Rolling next-bucket return forecasts, refit every cadence.

    Targets are raw log returns.  Out-of-sample R^2 is pooled per
    (stock, day) over the day's one-step forecasts, so each forward window
    result carries the same day-level OOS value; in-sample adjusted R^2 is
    per refit.  The forecast series feeds the backtests.
    """
    if spec.family not in FORWARD_FAMILIES:
        raise ValueError(f"unknown forward family {spec.family}")
    name = spec.display()
    report = ExperimentReport(model=name, spec=spec)
    fc_rows = []
    for day in panel.dates:
        da = _day_arrays(panel, day)
        nw = int(round(spec.window_minutes * 60.0 / da.h))
        nc = int(round(spec.cadence_minutes * 60.0 / da.h))
        k = da.t.shape[0]
        cross = spec.family in ("f_ci", "f_ci_int", "f_cr")
        for si, stock in enumerate(da.stocks):
            feats, labels = _forward_features(da, spec, si)
            target = np.full(k, np.nan)
            target[: k - 1] = da.ret[si][1:]           # target at row t is R_{t+1}
            row_ok = np.isfinite(feats).all(axis=1) & np.isfinite(target)
            day_results = []
            day_forecasts = []
            for i0 in range(0, k - nw - nc + 1, nc):
                decision = i0 + nw - 1
                train = np.flatnonzero(row_ok[i0:decision]) + i0
                if train.size < max(8, spec.lags + 2):
                    report.skipped.append((stock, day, float(da.t[i0] - da.h), "insufficient valid rows"))
                    continue
                # leakage guard: every training target precedes the forecast bucket
                assert train.max() + 1 <= decision
                dm = DesignMatrix(x=feats[train], y=target[train], labels=labels)
                try:
                    fit = _fit(dm, spec, name)
                except (ValueError, RuntimeError) as exc:
                    report.skipped.append((stock, day, float(da.t[i0] - da.h), str(exc)))
                    continue
                fc = float("nan")
                if np.isfinite(feats[decision]).all():
                    fc = float(fit.predict(feats[decision][None, :])[0])
                day_results.append((float(da.t[i0] - da.h), fit, fc, decision))
                day_forecasts.append((decision, fc))
            # pooled one-step OOS R^2 for the day
            pairs = [(fc, target[dec]) for dec, fc in day_forecasts
                     if np.isfinite(fc) and np.isfinite(target[dec])]
            day_oos = float("nan")
            if len(pairs) >= 2:
                preds = np.array([p for p, _ in pairs])
                actual = np.array([a for _, a in pairs])
                day_oos = oos_r2(actual, preds)
            for wstart, fit, fc, dec in day_results:
                report.results.append(WindowResult(
                    model=name, stock=stock, day=day, window_start=wstart,
                    is_r2=fit.adj_r2, is_r2_unadj=fit.r2, oos_r2=day_oos,
                    lam=fit.lam, nnz=fit.nnz, beta=fit.beta, labels=fit.labels,
                ))
                fc_rows.append({
                    "model": name, "stock": stock, "day": day,
                    "t": float(da.t[dec]), "forecast": fc,
                    "realized": float(target[dec]),
                    "spread": float(da.spread[si][dec]),
                })
    report.forecasts = pd.DataFrame(fc_rows)
    return report


# ---------------------------------------------------------------------------
# multi-horizon impact
# ---------------------------------------------------------------------------


@dataclass
class HorizonImpactFit:
    horizons: int
    beta: np.ndarray         # beta_s for s = 1..p
    cumulative: np.ndarray   # partial sums of beta

    @property
    def cumulative_bps(self) -> np.ndarray:
        return self.cumulative * 1e4


def fit_horizon_impact(nret: np.ndarray, ofi1: np.ndarray, p: int) -> HorizonImpactFit:
    """OLS of r_{t+1} on own best-level OFIs at lags 1..p (one refit).

    The s-th coefficient is the impact of flow s buckets back; partial sums
    telescope into the cumulative impact profile.
    """
    if p < 1:
        raise ValueError("horizon count p must be >= 1")
    nret = np.asarray(nret, dtype=np.float64)
    ofi1 = np.asarray(ofi1, dtype=np.float64)
    t_max = nret.shape[0] - 1
    rows = np.arange(p - 1, t_max)
    x = np.column_stack([ofi1[rows - s + 1] for s in range(1, p + 1)])
    y = nret[rows + 1]
    keep = np.isfinite(x).all(axis=1) & np.isfinite(y)
    x, y = x[keep], y[keep]
    if x.shape[0] <= p + 1:
        raise ValueError(f"need more than p + 1 = {p + 1} rows, got {x.shape[0]}")
    fit = ols_fit(DesignMatrix(x=x, y=y, labels=[f"lag{s}" for s in range(1, p + 1)]),
                  model="horizon-impact")
    return HorizonImpactFit(horizons=p, beta=fit.beta, cumulative=np.cumsum(fit.beta))


def run_horizon_impact(panel: FeaturePanel, p: int = 60) -> pd.DataFrame:
    """Daily refits of the multi-horizon model, averaged across stock-days.

    Returns a frame with per-horizon mean coefficients and cumulative sums
    (also in basis points).
    """
    betas = []
    for (stock, day), f in sorted(panel.days.items()):
        try:
            fit = fit_horizon_impact(f.nret, f.ofi[:, 0], p)
        except ValueError:
            continue
        betas.append(fit.beta)
    if not betas:
        raise ValueError("no stock-day had enough rows for the horizon model")
    beta = np.mean(betas, axis=0)
    cum = np.cumsum(beta)
    return pd.DataFrame({
        "horizon": np.arange(1, p + 1),
        "beta": beta,
        "cumulative": cum,
        "cumulative_bps": cum * 1e4,
    })


# ---------------------------------------------------------------------------
# characteristics and quartiles
# ---------------------------------------------------------------------------


def quartile_assign(values: np.ndarray) -> np.ndarray:
    """Quartile bucket (0..3) per value; boundary ties go to the lower bucket."""
    values = np.asarray(values, dtype=np.float64)
    if values.shape[0] < 4:
        raise ValueError("need at least 4 stocks for quartiles")
    thresholds = np.percentile(values, [25, 50, 75])
    return (values[:, None] > thresholds[None, :]).sum(axis=1)


def quartile_report(characteristics: pd.DataFrame, r2: pd.DataFrame) -> pd.DataFrame:
    """Mean IS/OOS R^2 per characteristic quartile.

    ``characteristics``: index stock, columns volume / volatility / spread.
    ``r2``: index stock, columns is_r2 / oos_r2.
    """
    stocks = characteristics.index
    rows = []
    degenerate = False
    labels = ["[0%, 25%)", "[25%, 50%)", "[50%, 75%)", "[75%, 100%]"]
    for char in characteristics.columns:
        vals = characteristics[char].to_numpy(dtype=np.float64)
        if np.ptp(vals) == 0:
            degenerate = True
        buckets = quartile_assign(vals)
        for kind in ("is_r2", "oos_r2"):
            row = {"characteristic": char, "kind": kind}
            for b in range(4):
                sel = stocks[buckets == b]
                row[labels[b]] = float(r2.loc[sel, kind].mean()) if len(sel) else float("nan")
            rows.append(row)
    out = pd.DataFrame(rows)
    out.attrs["degenerate"] = degenerate
    return out


def stock_characteristics(streams, panel: FeaturePanel, day: str) -> pd.DataFrame:
    """Previous-day stock characteristics: traded volume, 1-minute return
    volatility, and average relative spread."""
    from .features import minute_returns

    rows = {}
    for (stock, d), sd in streams.items():
        if d != day:
            continue
        volume = sum(e.size for e in sd.events if e.event_type in (4, 5))
        _, rets = minute_returns(sd.book, (sd.book.time[0], sd.book.time[-1])) \
            if len(sd.book) else (None, np.array([]))
        vol = float(np.nanstd(rets, ddof=1)) if np.isfinite(rets).sum() >= 2 else float("nan")
        spread = float(np.nanmean(panel.get(stock, day).spread)) if (stock, day) in panel.days else float("nan")
        rows[stock] = {"volume": float(volume), "volatility": vol, "spread": spread}
    return pd.DataFrame.from_dict(rows, orient="index").sort_index()


def mean_r2_by_stock(report: ExperimentReport) -> pd.DataFrame:
    frame = report.frame()
    if frame.empty:
        return pd.DataFrame(columns=["is_r2", "oos_r2"])
    return frame.groupby("stock")[["is_r2", "oos_r2"]].mean()
