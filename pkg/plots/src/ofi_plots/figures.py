"""Figure builders over the pipeline's exported CSV/JSON artifacts.

Every figure consumes one documented artifact, draws it without any
statistical recomputation, and reports the exact plotted values for the
sidecar.  Rendering is deterministic: circular network layouts are ordered
by sector then market-cap rank, and no randomized layout is used.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from pathlib import Path

import matplotlib
matplotlib.use("Agg")
import matplotlib.pyplot as plt
import pandas as pd

matplotlib.rcParams["svg.hashsalt"] = "ofi-plots"


class SchemaError(ValueError):
    pass


def _require(frame: pd.DataFrame, columns: list[str], artifact: str) -> None:
    for col in columns:
        if col not in frame.columns:
            raise SchemaError(f"{artifact}: missing column {col!r}")


@dataclass
class FigureSpec:
    figure_id: str
    artifact: str            # manifest key, or glob-like prefix
    description: str


def _load_csv(path: Path) -> pd.DataFrame:
    return pd.read_csv(path)


def draw_ofi_corr_heatmap(path: Path, ax) -> dict:
    frame = _load_csv(path)
    _require(frame, ["level"], path.name)
    levels = frame["level"].tolist()
    mat = frame[levels].to_numpy(dtype=float)
    im = ax.imshow(mat, vmin=-1.0, vmax=1.0, cmap="viridis")
    ax.set_xticks(range(len(levels)), levels, rotation=45)
    ax.set_yticks(range(len(levels)), levels)
    ax.figure.colorbar(im, ax=ax, shrink=0.8)
    ax.set_title("average correlation of per-level order flow imbalances")
    return frame.to_dict(orient="list")


def draw_pc1_weights(path: Path, ax) -> dict:
    frame = _load_csv(path)
    _require(frame, ["level", "mean_weight", "std_weight"], path.name)
    ax.bar(frame["level"], frame["mean_weight"], yerr=frame["std_weight"],
           color="#4878a8", capsize=3)
    ax.set_xlabel("book level")
    ax.set_ylabel("first principal component weight")
    ax.set_title("first-component weights across windows (mean and one std)")
    return frame.to_dict(orient="list")


def draw_r2_timeseries(path: Path, ax) -> dict:
    frame = _load_csv(path)
    _require(frame, ["model", "day", "is_r2", "oos_r2"], path.name)
    for model, grp in frame.groupby("model", sort=True):
        ax.plot(grp["day"], grp["oos_r2"], marker="o", label=model)
    ax.set_ylabel("out-of-sample R^2 (%)")
    ax.legend(fontsize=7)
    ax.tick_params(axis="x", rotation=45)
    ax.set_title("average out-of-sample fit by period")
    return frame.to_dict(orient="list")


def draw_singular_values(path: Path, ax) -> dict:
    frame = _load_csv(path)
    _require(frame, ["model", "rank", "value"], path.name)
    models = sorted(frame["model"].unique())
    width = 0.8 / max(len(models), 1)
    for i, model in enumerate(models):
        grp = frame[frame.model == model]
        ax.bar(grp["rank"] + i * width, grp["value"], width=width, label=model)
    ax.set_xlabel("singular value rank")
    ax.set_ylabel("singular value")
    ax.legend(fontsize=7)
    ax.set_title("spectrum of the averaged coefficient matrix")
    return frame.to_dict(orient="list")


def draw_horizon_pnl(path: Path, ax) -> dict:
    frame = _load_csv(path)
    _require(frame, ["holding", "pnl_bps"], path.name)
    ax.plot(frame["holding"], frame["pnl_bps"], marker=".", color="#2a6d3c")
    ax.axhline(0.0, lw=0.6, color="black")
    ax.set_xlabel("holding period (minutes)")
    ax.set_ylabel("average PnL (bps)")
    ax.set_title("flow-sign strategy PnL by holding period")
    return frame.to_dict(orient="list")


def draw_horizon_coef(path: Path, ax) -> dict:
    frame = _load_csv(path)
    _require(frame, ["horizon", "cumulative_bps"], path.name)
    ax.plot(frame["horizon"], frame["cumulative_bps"], marker=".", color="#7a3c8f")
    ax.axhline(0.0, lw=0.6, color="black")
    ax.set_xlabel("future horizon (minutes)")
    ax.set_ylabel("cumulative coefficient (bps)")
    ax.set_title("cumulative multi-horizon impact of best-level flow")
    return frame.to_dict(orient="list")


_SECTOR_PALETTE = ["#4878a8", "#e1812b", "#3a923a", "#c03d3e", "#9372b2",
                   "#845b53", "#d684bd", "#797979", "#b2b23c", "#36a2ac"]


def draw_network(path: Path, ax) -> dict:
    doc = json.loads(Path(path).read_text())
    for key in ("nodes", "edges", "meta"):
        if key not in doc:
            raise SchemaError(f"{path.name}: missing column {key!r}")
    nodes = doc["nodes"]
    # circle ordered by sector, then market-cap rank
    ordered = sorted(nodes, key=lambda n: (str(n.get("sector", "")),
                                           n.get("mcap_rank", 0), n["id"]))
    pos = {}
    sectors = sorted({str(n.get("sector", "")) for n in ordered})
    color_of = {s: _SECTOR_PALETTE[i % len(_SECTOR_PALETTE)]
                for i, s in enumerate(sectors)}
    n = len(ordered)
    for i, node in enumerate(ordered):
        angle = 2.0 * math.pi * i / max(n, 1)
        pos[node["id"]] = (math.cos(angle), math.sin(angle))
    weights = [abs(e["weight"]) for e in doc["edges"]] or [1.0]
    wmax = max(weights) or 1.0
    for edge in doc["edges"]:
        (x0, y0), (x1, y1) = pos[edge["src"]], pos[edge["dst"]]
        color = "#2a6d3c" if edge["weight"] > 0 else "black"
        ax.annotate("", xy=(x1, y1), xytext=(x0, y0),
                    arrowprops=dict(arrowstyle="-|>", color=color,
                                    lw=0.4 + 2.2 * abs(edge["weight"]) / wmax,
                                    shrinkA=8, shrinkB=8))
    for node in ordered:
        x, y = pos[node["id"]]
        ax.plot([x], [y], "o", ms=9, color=color_of[str(node.get("sector", ""))])
        ax.annotate(node["id"], (x * 1.12, y * 1.12), ha="center", va="center",
                    fontsize=6)
    ax.set_xlim(-1.3, 1.3)
    ax.set_ylim(-1.3, 1.3)
    ax.set_aspect("equal")
    ax.axis("off")
    ax.set_title(f"cross-impact network ({doc['meta'].get('model', '')}, "
                 f"top {100 - doc['meta'].get('percentile', 0):g}% edges)")
    return doc


FIGURES = {
    "ofi_corr_heatmap": ("ofi_corr.csv", draw_ofi_corr_heatmap),
    "pc1_weights": ("pc1_weights.csv", draw_pc1_weights),
    "r2_timeseries": ("table_r2_by_day.csv", draw_r2_timeseries),
    "singular_values": ("singular_values.csv", draw_singular_values),
    "horizon_pnl": ("horizon_pnl.csv", draw_horizon_pnl),
    "horizon_coef": ("horizon_coef.csv", draw_horizon_coef),
    # network figures are looked up per exported model: network_<model>
}


def resolve_figure(figure_id: str) -> tuple[str, callable]:
    if figure_id in FIGURES:
        return FIGURES[figure_id]
    if figure_id.startswith("network"):
        return f"{figure_id}.json", draw_network
    raise KeyError(f"unknown figure id {figure_id!r}; "
                   f"known: {', '.join(sorted(FIGURES))}, network_<model>")


def render(figure_id: str, manifest_path: Path | str, out_path: Path | str) -> Path:
    """Render one figure from a pipeline manifest.

    Writes the image (vector formats render byte-identically across runs)
    plus a ``<out>.values.json`` sidecar holding exactly the plotted values.
    """
    manifest_path = Path(manifest_path)
    manifest = json.loads(manifest_path.read_text())
    artifact, drawer = resolve_figure(figure_id)
    if artifact not in manifest.get("outputs", {}):
        raise FileNotFoundError(f"artifact {artifact!r} not in manifest")
    path = manifest_path.parent / artifact
    if not path.exists():
        raise FileNotFoundError(f"artifact file missing: {path}")
    fig, ax = plt.subplots(figsize=(6.0, 4.5), dpi=120)
    try:
        values = drawer(path, ax)
        out_path = Path(out_path)
        out_path.parent.mkdir(parents=True, exist_ok=True)
        fig.savefig(out_path, metadata=_fixed_metadata(out_path))
    finally:
        plt.close(fig)
    sidecar = out_path.with_suffix(out_path.suffix + ".values.json")
    sidecar.write_text(json.dumps(values, indent=1, sort_keys=True,
                                  allow_nan=True) + "\n")
    return out_path


def _fixed_metadata(out_path: Path) -> dict | None:
    # strip timestamps so vector output is reproducible byte for byte
    suffix = out_path.suffix.lower()
    if suffix == ".svg":
        return {"Date": None}
    if suffix == ".pdf":
        return {"CreationDate": None}
    return None
