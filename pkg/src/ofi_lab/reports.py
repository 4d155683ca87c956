"""Aggregate report tables from experiment runs (percent units, CSV-ready)."""

from __future__ import annotations

import numpy as np
import pandas as pd

from .experiments import ExperimentReport, paired_r2


def multilevel_table(reports: dict[int, ExperimentReport]) -> pd.DataFrame:
    """Nested price-impact summary: R^2, increments and p-values by depth.

    ``reports`` maps the level count m to its report.  Columns are the
    models in depth order; rows hold in-sample / out-of-sample mean R^2 (in
    percent), the increment over the previous depth, and the one-sided
    p-value of that increment.
    """
    ms = sorted(reports)
    cols = {m: reports[m].model for m in ms}
    rows = []
    for panel, kind in (("in_sample", "is"), ("out_of_sample", "oos")):
        r2 = {m: (reports[m].mean_is() if kind == "is" else reports[m].mean_oos()) * 100
              for m in ms}
        deltas = {ms[0]: np.nan}
        pvals = {ms[0]: np.nan}
        for prev, cur in zip(ms, ms[1:]):
            d, p, _ = paired_r2(reports[prev], reports[cur], kind)
            deltas[cur] = d * 100
            pvals[cur] = p
        rows.append({"panel": panel, "stat": "r2", **{cols[m]: r2[m] for m in ms}})
        rows.append({"panel": panel, "stat": "delta_r2", **{cols[m]: deltas[m] for m in ms}})
        rows.append({"panel": panel, "stat": "p_value", **{cols[m]: pvals[m] for m in ms}})
    return pd.DataFrame(rows)


def pi_ci_table(pairs: dict[str, tuple[ExperimentReport, ExperimentReport]]) -> pd.DataFrame:
    """Price-impact vs cross-impact summary rows per feature set.

    ``pairs`` maps a feature label (e.g. "ofi1", "ofiI") to the (PI, CI)
    report pair; output mirrors the four-column R^2 / Delta / p layout.
    """
    rows = []
    for feature, (pi, ci) in pairs.items():
        for panel, kind in (("in_sample", "is"), ("out_of_sample", "oos")):
            d, p, n = paired_r2(pi, ci, kind)
            rows.append({
                "feature": feature, "panel": panel,
                "pi_r2": (pi.mean_is() if kind == "is" else pi.mean_oos()) * 100,
                "ci_r2": (ci.mean_is() if kind == "is" else ci.mean_oos()) * 100,
                "delta_r2": d * 100, "p_value": p, "n_windows": n,
            })
    return pd.DataFrame(rows)


def r2_by_day_table(reports: list[ExperimentReport]) -> pd.DataFrame:
    """Per-day average R^2 per model (time-series layout)."""
    frames = []
    for rep in reports:
        f = rep.frame()
        if f.empty:
            continue
        g = f.groupby("day")[["is_r2", "oos_r2"]].mean().reset_index()
        g.insert(0, "model", rep.model)
        frames.append(g)
    out = pd.concat(frames, ignore_index=True) if frames else pd.DataFrame(
        columns=["model", "day", "is_r2", "oos_r2"])
    out[["is_r2", "oos_r2"]] = out[["is_r2", "oos_r2"]] * 100
    return out


def pnl_summary_table(pnl: pd.DataFrame) -> pd.DataFrame:
    """Strategy x model mean per-minute PnL in bps."""
    if pnl.empty:
        return pd.DataFrame(columns=["model", "forecast_implied", "long_short"])
    wide = pnl.pivot_table(index="model", columns="strategy", values="pnl_bps",
                           aggfunc="mean", sort=True)
    return wide.reset_index()


def by_day_table(report_frames: dict[str, pd.DataFrame], pnl: pd.DataFrame) -> pd.DataFrame:
    """Per-day OOS R^2 and PnL per model (period-columns layout)."""
    rows = []
    days = sorted(pnl["day"].unique()) if not pnl.empty else []
    for model, frame in sorted(report_frames.items()):
        if frame.empty:
            continue
        r2 = frame.groupby("day")["oos_r2"].mean() * 100
        row = {"metric": "oos_r2_pct", "model": model}
        row.update({d: r2.get(d, np.nan) for d in (days or r2.index)})
        rows.append(row)
    if not pnl.empty:
        for model, grp in pnl.groupby("model", sort=True):
            daily = grp.groupby("day")["pnl_bps"].mean()
            row = {"metric": "pnl_bps", "model": model}
            row.update({d: daily.get(d, np.nan) for d in days})
            rows.append(row)
    return pd.DataFrame(rows)


def forward_depth_table(fit_frames: dict[str, pd.DataFrame], pnl: pd.DataFrame) -> pd.DataFrame:
    """Own-flow forward models compared across feature depth.

    Rows: in/out-of-sample R^2 (percent) and per-strategy PnL (bps);
    columns: the model display names present.
    """
    cols = sorted(fit_frames)
    rows = []
    for metric, field in (("is_r2_pct", "is_r2"), ("oos_r2_pct", "oos_r2")):
        row = {"metric": metric}
        for name in cols:
            row[name] = float(fit_frames[name][field].mean()) * 100
        rows.append(row)
    if not pnl.empty:
        for strategy, grp in pnl.groupby("strategy", sort=True):
            by_model = grp.groupby("model")["pnl_bps"].mean()
            row = {"metric": f"pnl_bps_{strategy}"}
            for name in cols:
                row[name] = float(by_model.get(name, np.nan))
            rows.append(row)
    return pd.DataFrame(rows)


def coef_long_frame(report: ExperimentReport) -> pd.DataFrame:
    """Per-window fitted coefficients in long form (for network assembly)."""
    rows = []
    for r in report.results:
        for label, b in zip(r.labels, r.beta):
            rows.append({"model": r.model, "stock": r.stock, "day": r.day,
                         "window_start": r.window_start, "feature": label,
                         "value": b})
    return pd.DataFrame(rows)
