"""Pipeline driver: synth/ingest -> features -> model runs -> backtests ->
networks, from one JSON config, with atomic artifacts and a hashed manifest.

Subcommands: synth | features | contemporaneous | forward | backtest |
network | all.  Every stage reads its inputs from files written by earlier
stages, so staged and end-to-end runs produce identical artifacts; reruns
under a fixed seed reproduce identical manifest hashes.
"""

from __future__ import annotations

import argparse
import dataclasses
import hashlib
import json
import logging
import os
import sys
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path

import numpy as np
import pandas as pd

from . import networks as netmod
from . import reports
from .backtest import horizon_pnl_profile, run_backtest
from .experiments import (
    ModelSpec,
    fill_integrated_ofi,
    quartile_report,
    run_common_factor,
    run_contemporaneous,
    run_forward,
    run_horizon_impact,
    stock_characteristics,
)
from .factors import fit_pca
from .features import read_feature_csvs
from .lob import parse_message_file, parse_orderbook_file
from .pipeline import FULL_DAY, MODEL_SESSION, build_panel, minute_panel
from .regression import LassoConfig
from .synth import CrossLink, SynthConfig, generate, write_lobster

log = logging.getLogger("ofi_lab")

CONTEMPORANEOUS_MODELS = tuple(f"pi{m}" for m in range(1, 11)) + (
    "pi_int", "ci", "ci_int", "ci_deep", "pi_common", "ci_common")
FORWARD_MODELS = ("f_pi", "f_ci", "f_pi_int", "f_ci_int", "f_ar", "f_cr", "f_pi_deep")


@dataclasses.dataclass
class RunConfig:
    mode: str = "synth"                      # "synth" | "lobster-dir"
    data_dir: str | None = None              # input for lobster-dir mode
    n_levels: int = 10
    session: tuple[float, float] = MODEL_SESSION
    day_bounds: tuple[float, float] = FULL_DAY
    bucket_seconds: float = 10.0
    window_minutes: float = 30.0
    cadence_minutes: float = 30.0
    forward_bucket_seconds: float = 60.0
    models: tuple[str, ...] = ("pi1", "pi2", "pi_int", "ci", "ci_int")
    forward_models: tuple[str, ...] = ("f_pi", "f_ci")
    horizon_max: int = 60
    network_models: tuple[str, ...] = ("ci",)
    network_percentile: float = 95.0
    network_normalization: str = "mean_abs"
    lasso: dict = dataclasses.field(default_factory=dict)
    synth: dict = dataclasses.field(default_factory=dict)
    seed: int = 0
    out_dir: str = "out"
    threads: int = 1

    def validate(self) -> None:
        if self.mode not in ("synth", "lobster-dir"):
            raise ConfigError("mode", f"unknown input mode {self.mode!r}")
        if self.mode == "lobster-dir" and not self.data_dir:
            raise ConfigError("data_dir", "lobster-dir mode needs data_dir")
        for name in self.models:
            if name not in CONTEMPORANEOUS_MODELS:
                raise ConfigError("models", f"unknown model name {name!r}")
        for name in self.forward_models:
            if name not in FORWARD_MODELS:
                raise ConfigError("forward_models", f"unknown model name {name!r}")
        if self.threads < 0:
            raise ConfigError("threads", "threads must be >= 0")

    def to_dict(self) -> dict:
        out = dataclasses.asdict(self)
        out["session"] = list(self.session)
        out["day_bounds"] = list(self.day_bounds)
        out["models"] = list(self.models)
        out["forward_models"] = list(self.forward_models)
        out["network_models"] = list(self.network_models)
        return out

    @classmethod
    def from_dict(cls, raw: dict) -> "RunConfig":
        known = {f.name for f in dataclasses.fields(cls)}
        unknown = set(raw) - known
        if unknown:
            raise ConfigError(sorted(unknown)[0], "unknown config field")
        kw = dict(raw)
        for key in ("session", "day_bounds"):
            if key in kw:
                kw[key] = tuple(float(v) for v in kw[key])
        for key in ("models", "forward_models", "network_models"):
            if key in kw:
                kw[key] = tuple(kw[key])
        return cls(**kw)

    def lasso_config(self) -> LassoConfig:
        return LassoConfig(**self.lasso)

    def synth_config(self) -> SynthConfig:
        kw = dict(self.synth)
        links = [CrossLink(**l) for l in kw.pop("cross_links", [])]
        kw.setdefault("n_levels", self.n_levels)
        kw.setdefault("seed", self.seed)
        kw.setdefault("session", self.day_bounds)
        return SynthConfig(cross_links=links, **kw)


class ConfigError(ValueError):
    def __init__(self, field: str, message: str):
        super().__init__(message)
        self.field = field


def model_spec(cfg: RunConfig, name: str, forward: bool = False) -> ModelSpec:
    lasso = cfg.lasso_config()
    if name.startswith("pi") and name[2:].isdigit():
        return ModelSpec(family="pi", levels=int(name[2:]),
                         window_minutes=cfg.window_minutes,
                         cadence_minutes=cfg.cadence_minutes, lasso=lasso)
    window = cfg.window_minutes
    cadence = 1.0 if forward else cfg.cadence_minutes
    return ModelSpec(family=name, window_minutes=window,
                     cadence_minutes=cadence, lasso=lasso)


# ---------------------------------------------------------------------------
# artifact plumbing
# ---------------------------------------------------------------------------


class Workspace:
    """Output directory with atomic writes and a content-hash manifest."""

    def __init__(self, out_dir: Path):
        self.out = Path(out_dir)
        self.out.mkdir(parents=True, exist_ok=True)
        self.artifacts: dict[str, str] = {}

    def _register(self, path: Path) -> None:
        digest = hashlib.sha256(path.read_bytes()).hexdigest()
        self.artifacts[str(path.relative_to(self.out))] = digest

    def write_text(self, rel: str, text: str) -> Path:
        path = self.out / rel
        path.parent.mkdir(parents=True, exist_ok=True)
        tmp = path.with_name(path.name + ".tmp")
        tmp.write_text(text)
        os.replace(tmp, path)
        self._register(path)
        return path

    def write_frame(self, rel: str, frame: pd.DataFrame) -> Path:
        return self.write_text(rel, frame.to_csv(index=False, float_format="%.12g"))

    def write_json(self, rel: str, obj) -> Path:
        return self.write_text(rel, json.dumps(obj, indent=1, sort_keys=True) + "\n")

    def adopt(self, path: Path) -> None:
        self._register(path)

    def manifest(self, command: str, config: RunConfig) -> Path:
        doc = {
            "command": command,
            "seed": config.seed,
            "config_sha256": hashlib.sha256(
                json.dumps(config.to_dict(), sort_keys=True).encode()).hexdigest(),
            "outputs": dict(sorted(self.artifacts.items())),
        }
        return self.write_json("manifest.json", doc)


def _run_tasks(tasks, threads: int):
    """Run (key, fn) tasks, returning {key: result}; key-ordered, so the
    output is identical for any thread budget."""
    if threads == 0:
        threads = os.cpu_count() or 1
    results = {}
    if threads <= 1:
        for key, fn in tasks:
            results[key] = fn()
    else:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            futures = {key: pool.submit(fn) for key, fn in tasks}
            for key, fut in futures.items():
                results[key] = fut.result()
    return results


def _load_books(data_dir: Path, n_levels: int):
    """Read every LOBSTER pair in a directory, keyed by (stock, day)."""
    books = {}
    events = {}
    for msg_path in sorted(data_dir.glob("*_message_*.csv")):
        stem = msg_path.name.split("_message_")[0]
        stock, day = stem.split("_")[0], stem.split("_")[1]
        book_path = Path(str(msg_path).replace("_message_", "_orderbook_"))
        evs = parse_message_file(msg_path)
        times = np.array([e.time for e in evs])
        books[(stock, day)] = parse_orderbook_file(book_path, n_levels, times)
        events[(stock, day)] = evs
    if not books:
        raise FileNotFoundError(f"no LOBSTER message files under {data_dir}")
    return books, events


def _data_dir(cfg: RunConfig, ws: Workspace) -> Path:
    return Path(cfg.data_dir) if cfg.mode == "lobster-dir" else ws.out / "data"


# ---------------------------------------------------------------------------
# stages
# ---------------------------------------------------------------------------


def stage_synth(cfg: RunConfig, ws: Workspace) -> None:
    scfg = cfg.synth_config()
    streams, gt = generate(scfg)
    data_dir = ws.out / "data"
    for path in write_lobster(streams, gt, data_dir):
        ws.adopt(path)
    sectors = ["tech", "financials", "health", "energy"]
    stocks = sorted({s for s, _ in streams})
    universe = pd.DataFrame({
        "ticker": stocks,
        "sector": [sectors[i % len(sectors)] for i in range(len(stocks))],
        "mcap": [1000.0 - i for i in range(len(stocks))],
    })
    ws.write_frame("data/universe.csv", universe)
    log.info("synth: %d stock-days -> %s", len(streams), data_dir)


def stage_features(cfg: RunConfig, ws: Workspace) -> None:
    books, _ = _load_books(_data_dir(cfg, ws), cfg.n_levels)
    panel = build_panel(books, cfg.session, cfg.bucket_seconds, cfg.day_bounds)
    fill_integrated_ofi(panel, cfg.window_minutes)
    for path in panel.write_csvs(ws.out, "features"):
        ws.adopt(path)
    _write_factor_diagnostics(cfg, ws, panel)
    log.info("features: %d stock-days", len(panel.days))


def _write_factor_diagnostics(cfg: RunConfig, ws: Workspace, panel) -> None:
    per_block = int(round(cfg.window_minutes * 60.0 / cfg.bucket_seconds))
    evr_rows, w1_rows, corrs = [], [], []
    for (stock, day), f in sorted(panel.days.items()):
        ofi = f.ofi[f.valid & np.isfinite(f.ofi).all(axis=1)]
        if ofi.shape[0] >= 2:
            corrs.append(np.corrcoef(ofi.T))
        n_blocks = f.t.shape[0] // per_block
        for b in range(n_blocks):
            rows = f.ofi[b * per_block: (b + 1) * per_block]
            rows = rows[np.isfinite(rows).all(axis=1)]
            if rows.shape[0] < 2:
                continue
            pca = fit_pca(rows)
            if pca.degenerate:
                continue
            start = float(f.t[b * per_block] - f.h)
            evr_rows.append({"stock": stock, "day": day, "window_start": start,
                             **{f"component_{k + 1}": pca.ratios[k] * 100
                                for k in range(pca.ratios.shape[0])}})
            w1_rows.append({"stock": stock, "day": day, "window_start": start,
                            **{f"level_{k + 1}": pca.components[0][k]
                               for k in range(pca.components.shape[1])}})
    evr = pd.DataFrame(evr_rows)
    ws.write_frame("pca_evr.csv", evr)
    w1 = pd.DataFrame(w1_rows)
    level_cols = [c for c in w1.columns if c.startswith("level_")]
    summary = pd.DataFrame({
        "level": np.arange(1, len(level_cols) + 1),
        "mean_weight": [w1[c].mean() for c in level_cols],
        "std_weight": [w1[c].std(ddof=1) for c in level_cols],
    }) if len(w1) else pd.DataFrame(columns=["level", "mean_weight", "std_weight"])
    ws.write_frame("pc1_weights.csv", summary)
    if corrs:
        mean_corr = np.mean(corrs, axis=0)
        m = mean_corr.shape[0]
        corr = pd.DataFrame(mean_corr,
                            columns=[f"ofi{j + 1}" for j in range(m)])
        corr.insert(0, "level", [f"ofi{j + 1}" for j in range(m)])
        ws.write_frame("ofi_corr.csv", corr)


def _feature_paths(ws: Workspace) -> list[Path]:
    paths = sorted(ws.out.glob("features_*.csv"))
    if not paths:
        raise FileNotFoundError("run the features stage first")
    return paths


def stage_contemporaneous(cfg: RunConfig, ws: Workspace) -> None:
    panel = read_feature_csvs(_feature_paths(ws))
    tasks = []
    for name in cfg.models:
        spec = model_spec(cfg, name)
        if name in ("pi_common", "ci_common"):
            tasks.append((name, lambda s=spec: run_common_factor(panel, s)))
        else:
            tasks.append((name, lambda s=spec: run_contemporaneous(panel, s)))
    runs = _run_tasks(tasks, cfg.threads)
    for name in sorted(runs):
        rep = runs[name]
        ws.write_frame(f"fits_{name}.csv", rep.frame())
        if name.startswith("ci"):
            ws.write_frame(f"coef_{name}.csv", reports.coef_long_frame(rep))
    pi_depth = {int(n[2:]): runs[n] for n in runs if n.startswith("pi") and n[2:].isdigit()}
    if len(pi_depth) >= 2:
        ws.write_frame("table_pi_deep.csv", reports.multilevel_table(pi_depth))
    pairs = {}
    if "pi1" in runs and "ci" in runs:
        pairs["ofi1"] = (runs["pi1"], runs["ci"])
    if "pi_int" in runs and "ci_int" in runs:
        pairs["ofiI"] = (runs["pi_int"], runs["ci_int"])
    if pairs:
        ws.write_frame("table_pi_ci.csv", reports.pi_ci_table(pairs))
    if "pi_common" in runs and "ci_common" in runs:
        ws.write_frame("table_common_factor.csv", reports.pi_ci_table(
            {"ofi1": (runs["pi_common"], runs["ci_common"])}))
    if "ci_deep" in runs and "pi10" in runs:
        # deep cross-impact comparison pairs a LASSO-solved own-levels model
        spec = model_spec(cfg, "pi10")
        spec.solver = "lasso"
        pi10_lasso = run_contemporaneous(panel, spec)
        ws.write_frame("table_ci_deep.csv", reports.pi_ci_table(
            {"ofi_1_10": (pi10_lasso, runs["ci_deep"])}))
    ws.write_frame("table_r2_by_day.csv", reports.r2_by_day_table(
        [runs[n] for n in sorted(runs)]))
    _write_quartiles(cfg, ws, panel, runs)
    log.info("contemporaneous: %d models", len(runs))


def _write_quartiles(cfg: RunConfig, ws: Workspace, panel, runs) -> None:
    dates = panel.dates
    if len(dates) < 2 or len(panel.stocks) < 4:
        return
    try:
        books, events = _load_books(_data_dir(cfg, ws), cfg.n_levels)
    except FileNotFoundError:
        return
    from .synth import StockDay

    streams = {k: StockDay(stock=k[0], day=k[1], events=events[k], book=books[k])
               for k in books}
    for name in ("pi1", "pi_int"):
        if name not in runs:
            continue
        frame = runs[name].frame()
        if frame.empty:
            continue
        chars_per_day = []
        r2_rows = []
        for prev_day, day in zip(dates, dates[1:]):
            chars = stock_characteristics(streams, panel, prev_day)
            sub = frame[frame.day == day].groupby("stock")[["is_r2", "oos_r2"]].mean()
            both = chars.join(sub, how="inner").dropna()
            if len(both) >= 4:
                chars_per_day.append(both[["volume", "volatility", "spread"]])
                r2_rows.append(both[["is_r2", "oos_r2"]])
        if not chars_per_day:
            continue
        chars = pd.concat(chars_per_day).groupby(level=0).mean()
        r2 = pd.concat(r2_rows).groupby(level=0).mean() * 100
        if len(chars) >= 4:
            ws.write_frame(f"table_quartiles_{name}.csv", quartile_report(chars, r2))


def stage_forward(cfg: RunConfig, ws: Workspace) -> None:
    books, _ = _load_books(_data_dir(cfg, ws), cfg.n_levels)
    panel = build_panel(books, cfg.session, cfg.forward_bucket_seconds, cfg.day_bounds)
    fill_integrated_ofi(panel, cfg.window_minutes)
    tasks = [(name, lambda s=model_spec(cfg, name, forward=True): run_forward(panel, s))
             for name in cfg.forward_models]
    runs = _run_tasks(tasks, cfg.threads)
    for name in sorted(runs):
        rep = runs[name]
        ws.write_frame(f"fits_{name}.csv", rep.frame())
        ws.write_frame(f"forecasts_{name}.csv", rep.forecasts)
        if name in ("f_ci", "f_ci_int", "f_cr"):
            ws.write_frame(f"coef_{name}.csv", reports.coef_long_frame(rep))
    pairs = {}
    if "f_pi" in runs and "f_ci" in runs:
        pairs["ofi1"] = (runs["f_pi"], runs["f_ci"])
    if "f_pi_int" in runs and "f_ci_int" in runs:
        pairs["ofiI"] = (runs["f_pi_int"], runs["f_ci_int"])
    if "f_ar" in runs and "f_cr" in runs:
        pairs["returns"] = (runs["f_ar"], runs["f_cr"])
    if pairs:
        ws.write_frame("table_forward_r2.csv", reports.pi_ci_table(pairs))
    try:
        horizon = run_horizon_impact(panel, cfg.horizon_max)
        ws.write_frame("horizon_coef.csv", horizon)
    except ValueError as exc:
        log.warning("horizon impact skipped: %s", exc)
    log.info("forward: %d models", len(runs))


def stage_backtest(cfg: RunConfig, ws: Workspace) -> None:
    frames = []
    fit_frames = {}
    for name in cfg.forward_models:
        path = ws.out / f"forecasts_{name}.csv"
        if not path.exists():
            raise FileNotFoundError("run the forward stage first")
        frames.append(pd.read_csv(path))
        fit_path = ws.out / f"fits_{name}.csv"
        if fit_path.exists():
            fit_frames[name] = pd.read_csv(fit_path)
    pnl = run_backtest(pd.concat(frames, ignore_index=True))
    ws.write_frame("pnl.csv", pnl.rename(columns={"t": "minute"})[
        ["day", "minute", "strategy", "model", "pnl_bps", "n_selected"]])
    ws.write_frame("table_pnl.csv", reports.pnl_summary_table(pnl))
    named = {}
    for name, frame in fit_frames.items():
        if not frame.empty:
            named[frame["model"].iloc[0]] = frame
    ws.write_frame("table_forward_by_day.csv", reports.by_day_table(named, pnl))
    own_depth = {disp: frame for disp, frame in named.items()
                 if disp.startswith("F-PI")}
    if len(own_depth) >= 2:
        ws.write_frame("table_forward_depth.csv",
                       reports.forward_depth_table(own_depth, pnl))
    books, _ = _load_books(_data_dir(cfg, ws), cfg.n_levels)
    profile = horizon_pnl_profile(minute_panel(books, cfg.day_bounds), cfg.horizon_max)
    ws.write_frame("horizon_pnl.csv", profile)
    log.info("backtest: %d pnl rows", len(pnl))


def stage_network(cfg: RunConfig, ws: Workspace) -> None:
    sectors, mcap_rank = {}, {}
    uni_path = _data_dir(cfg, ws) / "universe.csv"
    if uni_path.exists():
        uni = pd.read_csv(uni_path)
        sectors = dict(zip(uni.ticker, uni.sector))
        order = uni.sort_values("mcap", ascending=False).reset_index()
        mcap_rank = {t: i for i, t in enumerate(order.ticker)}
    sv_rows, cent_rows, group_rows = [], [], []
    for name in cfg.network_models:
        path = ws.out / f"coef_{name}.csv"
        if not path.exists():
            raise FileNotFoundError(f"coefficients for {name!r} not found; "
                                    "run its stage first")
        frame = pd.read_csv(path)
        stocks, matrix = netmod.matrix_from_coef_frame(frame)
        net = netmod.threshold_network(
            stocks, matrix, percentile=cfg.network_percentile,
            normalization=cfg.network_normalization,
            sectors=sectors, mcap_rank=mcap_rank)
        net.meta["model"] = name
        if frame["feature"].str.contains(":lag").any():
            net.meta["lag_block"] = 0
        ws.write_json(f"network_{name}.json", net.to_json_dict())
        for rank, sv in enumerate(netmod.singular_values(
                matrix, normalize=cfg.network_normalization == "mean_abs"), start=1):
            sv_rows.append({"model": name, "rank": rank, "value": float(sv)})
        for stock, cent in sorted(netmod.out_degree_centrality(net).items()):
            cent_rows.append({"model": name, "stock": stock, "out_degree": cent})
        if sectors:
            for sector, vals in sorted(netmod.group_degree_centrality(net, sectors).items()):
                group_rows.append({"model": name, "sector": sector,
                                   "in_degree": vals["in"], "out_degree": vals["out"]})
    ws.write_frame("singular_values.csv", pd.DataFrame(sv_rows))
    ws.write_frame("centrality_out.csv", pd.DataFrame(cent_rows))
    ws.write_frame("centrality_group.csv", pd.DataFrame(group_rows))
    log.info("network: %d models", len(cfg.network_models))


STAGES = {
    "synth": (stage_synth,),
    "features": (stage_features,),
    "contemporaneous": (stage_contemporaneous,),
    "forward": (stage_forward,),
    "backtest": (stage_backtest,),
    "network": (stage_network,),
    "all": (stage_synth, stage_features, stage_contemporaneous, stage_forward,
            stage_backtest, stage_network),
}


def load_config(path: Path, out_dir: str | None, threads: int | None) -> RunConfig:
    raw = json.loads(Path(path).read_text())
    cfg = RunConfig.from_dict(raw)
    if out_dir:
        cfg.out_dir = out_dir
    env_threads = os.environ.get("OFI_LAB_THREADS")
    if env_threads is not None:
        cfg.threads = int(env_threads)
    if threads is not None:
        cfg.threads = threads
    cfg.validate()
    return cfg


def main(argv: list[str] | None = None) -> int:
    parser = argparse.ArgumentParser(
        prog="ofi-lab",
        description="order-flow-imbalance impact models and backtests")
    parser.add_argument("command", choices=sorted(STAGES))
    parser.add_argument("--config", required=True, type=Path)
    parser.add_argument("--out", default=None)
    parser.add_argument("--threads", type=int, default=None,
                        help="0 = one worker per cpu; default from env/config")
    parser.add_argument("--log-level", default="INFO")
    args = parser.parse_args(argv)
    logging.basicConfig(level=args.log_level.upper(),
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        cfg = load_config(args.config, args.out, args.threads)
    except (ConfigError, ValueError, OSError) as exc:
        field = getattr(exc, "field", "config")
        print(json.dumps({"error": {"field": field, "message": str(exc)}}),
              file=sys.stderr)
        return 2
    ws = Workspace(Path(cfg.out_dir))
    # mode-aware skip: synth stage is meaningless for real data
    stages = [s for s in STAGES[args.command]
              if not (s is stage_synth and cfg.mode == "lobster-dir")]
    try:
        for stage in stages:
            stage(cfg, ws)
    except (ConfigError, ValueError, OSError, RuntimeError) as exc:
        field = getattr(exc, "field", "runtime")
        print(json.dumps({"error": {"field": field, "message": str(exc)}}),
              file=sys.stderr)
        return 1
    ws.manifest(args.command, cfg)
    return 0


if __name__ == "__main__":
    sys.exit(main())
