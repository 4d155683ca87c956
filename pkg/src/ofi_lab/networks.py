"""Averaged cross-impact coefficient matrices, thresholded directed
networks, and their spectral / centrality summaries.

The diagonal (self-impact) is excluded from thresholding and centrality;
edges are the off-diagonal entries whose magnitude strictly exceeds the
given percentile of off-diagonal magnitudes, with signs retained.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .experiments import ExperimentReport


@dataclass
class CoefNetwork:
    stocks: list[str]
    matrix: np.ndarray
    percentile: float
    normalization: str                   # "raw" | "mean_abs"
    edges: list[tuple[int, int, float]]  # (source, target, signed weight)
    sectors: dict[str, str] = field(default_factory=dict)
    mcap_rank: dict[str, int] = field(default_factory=dict)
    meta: dict = field(default_factory=dict)

    @property
    def n(self) -> int:
        return len(self.stocks)

    def adjacency(self) -> np.ndarray:
        adj = np.zeros((self.n, self.n), dtype=bool)
        for src, dst, _ in self.edges:
            adj[src, dst] = True
        return adj

    def to_json_dict(self) -> dict:
        return {
            "nodes": [
                {"id": s, "sector": self.sectors.get(s, ""),
                 "mcap_rank": self.mcap_rank.get(s, i)}
                for i, s in enumerate(self.stocks)
            ],
            "edges": [
                {"src": self.stocks[i], "dst": self.stocks[j], "weight": w}
                for i, j, w in self.edges
            ],
            "meta": {"percentile": self.percentile,
                     "normalization": self.normalization, **self.meta},
        }


def average_coefficients(report: ExperimentReport, lag: int = 0) -> tuple[list[str], np.ndarray]:
    """Entrywise mean coefficient matrix over a CI-family report's windows.

    Row i holds stock i's fitted coefficients on every stock's feature; for
    forward families only the requested lag block enters (default lag 0).
    Windows missing any stock are dropped so the average stays aligned.
    """
    if not report.results:
        raise ValueError("report has no fitted windows")
    stocks = sorted({r.stock for r in report.results})
    index = {s: i for i, s in enumerate(stocks)}
    per_window: dict[tuple[str, float], dict[str, np.ndarray]] = {}
    for r in report.results:
        per_window.setdefault((r.day, r.window_start), {})[r.stock] = _stock_block(
            r, stocks, lag)
    mats = []
    for key in sorted(per_window):
        rows = per_window[key]
        if len(rows) != len(stocks):
            continue
        mats.append(np.stack([rows[s] for s in stocks]))
    if not mats:
        raise ValueError("no window has fits for every stock")
    return stocks, np.mean(mats, axis=0)


def matrix_from_coef_frame(frame, lag: int = 0) -> tuple[list[str], np.ndarray]:
    """Average coefficient matrix from a long coefficient frame.

    ``frame`` columns: stock, day, window_start, feature, value; features
    look like "S01:ofi1" or "S01:ofi1:lag0".  Only the requested lag block
    enters; windows missing any stock are dropped.
    """
    frame = frame.copy()
    stocks = sorted(frame["stock"].unique())
    parts = frame["feature"].str.split(":")
    frame["src"] = parts.str[0]
    has_lag = frame["feature"].str.contains(":lag")
    if has_lag.any():
        frame = frame[~has_lag | frame["feature"].str.endswith(f":lag{lag}")]
    frame = frame[frame["src"].isin(stocks)]
    mats = []
    for _, grp in frame.groupby(["day", "window_start"], sort=True):
        if set(grp["stock"].unique()) != set(stocks):
            continue
        pivot = grp.pivot_table(index="stock", columns="src", values="value",
                                aggfunc="sum", sort=True)
        pivot = pivot.reindex(index=stocks, columns=stocks).fillna(0.0)
        mats.append(pivot.to_numpy())
    if not mats:
        raise ValueError("no window has fits for every stock")
    return stocks, np.mean(mats, axis=0)


def _stock_block(r, stocks: list[str], lag: int) -> np.ndarray:
    """Coefficient on each stock's feature (one lag block) for one fit."""
    out = np.zeros(len(stocks))
    want_suffix = f":lag{lag}"
    lagged = any(l.endswith(want_suffix) for l in r.labels)
    for label, b in zip(r.labels, r.beta):
        name = label
        if lagged:
            if not label.endswith(want_suffix):
                continue
            name = label[: -len(want_suffix)]
        stock = name.split(":")[0]
        if stock in stocks:
            out[stocks.index(stock)] += b
    if len(stocks) != out.shape[0]:
        raise ValueError("inconsistent dimensions across windows")
    return out


def threshold_network(
    stocks: list[str],
    matrix: np.ndarray,
    percentile: float = 95.0,
    normalization: str = "raw",
    sectors: dict[str, str] | None = None,
    mcap_rank: dict[str, int] | None = None,
) -> CoefNetwork:
    """Keep the off-diagonal entries strictly above the magnitude percentile.

    ``normalization="mean_abs"`` first divides the matrix by the mean
    absolute entry.  Percentiles use linear interpolation, so edge counts
    are reproducible; an all-zero off-diagonal yields an empty, flagged
    network.
    """
    if not 0 < percentile < 100:
        raise ValueError("percentile must be inside (0, 100)")
    mat = np.asarray(matrix, dtype=np.float64)
    n = mat.shape[0]
    if mat.shape != (n, n) or n != len(stocks):
        raise ValueError("matrix must be square and match the stock list")
    if normalization == "mean_abs":
        scale = np.abs(mat).mean()
        mat = mat / scale if scale > 0 else mat
    elif normalization != "raw":
        raise ValueError(f"unknown normalization {normalization}")
    off = ~np.eye(n, dtype=bool)
    mags = np.abs(mat[off])
    meta = {}
    edges: list[tuple[int, int, float]] = []
    if mags.size == 0 or not mags.any():
        meta["empty"] = True
    else:
        cut = float(np.percentile(mags, percentile))
        srcs, dsts = np.nonzero(off & (np.abs(mat) > cut))
        edges = [(int(i), int(j), float(mat[i, j])) for i, j in zip(srcs, dsts)]
        meta["threshold"] = cut
    return CoefNetwork(
        stocks=list(stocks), matrix=mat, percentile=percentile,
        normalization=normalization, edges=edges,
        sectors=sectors or {}, mcap_rank=mcap_rank or {}, meta=meta,
    )


def singular_values(matrix: np.ndarray, normalize: bool = False) -> np.ndarray:
    """Singular values in descending order; optionally scale the matrix by
    its mean absolute entry first."""
    mat = np.asarray(matrix, dtype=np.float64)
    if normalize:
        scale = np.abs(mat).mean()
        if scale > 0:
            mat = mat / scale
    return np.linalg.svd(mat, compute_uv=False)


def out_degree_centrality(network: CoefNetwork) -> dict[str, float]:
    """Fraction of other nodes each node's outgoing edges reach."""
    n = network.n
    if n < 2:
        raise ValueError("need at least 2 nodes")
    adj = network.adjacency()
    return {s: float(adj[i].sum()) / (n - 1) for i, s in enumerate(network.stocks)}


def group_degree_centrality(network: CoefNetwork, sectors: dict[str, str]) -> dict[str, dict[str, float]]:
    """Per-sector group in/out degree centrality.

    Out: fraction of outside stocks receiving an edge from the sector.
    In: fraction of outside stocks sending an edge into the sector.
    Empty "outside" sets yield NaN, flagged by absence of a finite value.
    """
    adj = network.adjacency()
    idx = {s: i for i, s in enumerate(network.stocks)}
    out = {}
    for sector in sorted(set(sectors.values())):
        members = [idx[s] for s in network.stocks if sectors.get(s) == sector]
        outside = [idx[s] for s in network.stocks if sectors.get(s) != sector]
        if not members or not outside:
            out[sector] = {"in": float("nan"), "out": float("nan")}
            continue
        sub_out = adj[np.ix_(members, outside)]
        sub_in = adj[np.ix_(outside, members)]
        out[sector] = {
            "out": float(sub_out.any(axis=0).sum()) / len(outside),
            "in": float(sub_in.any(axis=1).sum()) / len(outside),
        }
    return out
