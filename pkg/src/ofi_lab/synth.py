"""Synthetic multi-asset LOB streams with a planted linear impact mechanism.

Price changes are executed as one-tick ladder moves.  A ladder move whose
level-1 queues sit at the base depth D contributes exactly 2D to the
best-level OFI (ask depletion plus bid ladder rise), so bucketed mid-price
changes obey dP = OFI / (2D) + eps by construction: the eps channel is net
level-1 churn (limit adds / cancels that move no prices).  Cross links at
level 1 move the target through ordinary ladder moves; links at deeper
levels mirror the source's flow into the target's deep level and move the
target's price through "stealth" moves: both touches are cancelled down to
one share, the ladder moves, and the original sizes are restored, leaving a
best-level OFI footprint of exactly two shares per tick.  Every bucket's
realized OFIs, moves and churn are recorded in a ground-truth ledger.
"""

from __future__ import annotations

import datetime as _dt
import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .lob import BookSeries, LobEvent, book_to_csv, events_to_csv

EVENT_ADD = 1
EVENT_PARTIAL_CANCEL = 2
EVENT_DELETE = 3
EVENT_EXECUTE = 4

_BASE_DATE = _dt.date(2017, 1, 3)


@dataclass(frozen=True)
class CrossLink:
    """Directed flow link: the source's signal drives the target.

    ``level`` 1 routes through ordinary (visible) price moves; deeper
    levels mirror the source's flow into that level of the target's book
    and move the target price stealthily, invisible to its own best-level
    OFI.  ``lag`` is in buckets (0 = contemporaneous).
    """

    source: int
    target: int
    level: int
    strength: float
    lag: int = 0


@dataclass
class SynthConfig:
    n_stocks: int = 1
    n_levels: int = 10
    depth: int = 100                     # D: base shares at the touch
    session: tuple[float, float] = (34200.0, 57600.0)
    n_days: int = 1
    bucket_seconds: float = 10.0
    events_per_second: float = 1.0
    move_std: float = 1.0                # std (ticks) of per-bucket signal moves
    noise_std: float = 0.0               # std (ticks) of the return-noise term
    impact_coeffs: list[float] | None = None   # per-level ticks/share; [0] forced to 1/(2D)
    deep_flow_std: float = 0.0           # std (shares) of per-level deep churn
    cross_links: list[CrossLink] = field(default_factory=list)
    spread_ticks: int = 1
    seed: int = 0
    tick_units: int = 100                # price units (1e-4 dollars) per tick
    base_price: int = 2_000_000          # stock 0 starting best bid, in units
    deep_base_mult: int = 10             # deep-level base size, multiples of D

    def validate(self) -> None:
        if self.depth < 2:
            raise ValueError("depth must be >= 2")
        if self.events_per_second < 0:
            raise ValueError("event rate must be >= 0")
        if self.n_levels < 1 or self.n_stocks < 1 or self.n_days < 1:
            raise ValueError("n_levels, n_stocks and n_days must be >= 1")
        if self.bucket_seconds <= 0:
            raise ValueError("bucket_seconds must be positive")
        if self.spread_ticks < 1:
            raise ValueError("spread_ticks must be >= 1")
        if self.impact_coeffs is not None:
            if len(self.impact_coeffs) != self.n_levels:
                raise ValueError("impact_coeffs must have one entry per level")
            structural = 1.0 / (2.0 * self.depth)
            if abs(self.impact_coeffs[0] - structural) > 1e-12:
                raise ValueError(
                    f"impact_coeffs[0] must equal 1/(2*depth) = {structural}"
                )
        for link in self.cross_links:
            if not (0 <= link.source < self.n_stocks and 0 <= link.target < self.n_stocks):
                raise ValueError("cross link references an unknown stock")
            if link.source == link.target:
                raise ValueError("cross link source and target must differ")
            if not (1 <= link.level <= self.n_levels):
                raise ValueError("cross link level outside the book")
            if link.lag < 0:
                raise ValueError("cross link lag must be >= 0")


@dataclass
class DayLedger:
    """Realized per-bucket ground truth for one stock-day."""

    bucket_end: np.ndarray
    ofi: np.ndarray           # (K, M) measured raw OFI per level
    visible: np.ndarray       # (K,) signed visible ticks moved
    stealth: np.ndarray       # (K,) signed stealth ticks moved
    own_signal: np.ndarray    # (K,) the stock's own exogenous move draw
    noise_flow: np.ndarray    # (K,) level-1 OFI minus 2D * visible
    mid_end: np.ndarray       # (K,) mid-price in price units at bucket end

    @property
    def ticks_moved(self) -> np.ndarray:
        return self.visible + self.stealth


@dataclass
class GroundTruth:
    """Planted coefficients, links, and realized per-bucket ledgers."""

    depth: int
    tick_units: int
    n_levels: int
    seed: int
    links: list[CrossLink]
    impact_coeffs: list[float]
    ledgers: dict[tuple[str, str], DayLedger] = field(default_factory=dict)

    @property
    def slope_ticks_per_share(self) -> float:
        return 1.0 / (2.0 * self.depth)

    @property
    def slope_dollars_per_share(self) -> float:
        return self.tick_units * 1e-4 / (2.0 * self.depth)

    def replay_mid(self, stock: str, day: str) -> np.ndarray:
        """Mid path implied by the planted model and recorded noise.

        visible = (OFI1 - noise_flow) / (2D); mid = mid_0 + tick * cumsum of
        (visible + stealth).  Matches the generated path exactly.
        """
        led = self.ledgers[(stock, day)]
        visible = (led.ofi[:, 0] - led.noise_flow) / (2.0 * self.depth)
        steps = visible + led.stealth
        start = led.mid_end[0] - steps[0] * self.tick_units
        return start + np.cumsum(steps) * self.tick_units

    def explained_share(self, stock: str, session: tuple[float, float] | None = None) -> float:
        """Population R^2 of bucket tick moves against best-level OFI."""
        xs, ys = [], []
        for (s, _d), led in sorted(self.ledgers.items()):
            if s != stock:
                continue
            sel = np.ones(led.bucket_end.shape, dtype=bool)
            if session is not None:
                sel = (led.bucket_end > session[0]) & (led.bucket_end <= session[1])
            xs.append(led.ofi[sel, 0])
            ys.append(led.ticks_moved[sel])
        x = np.concatenate(xs).astype(np.float64)
        y = np.concatenate(ys).astype(np.float64)
        if x.std() == 0 or y.std() == 0:
            return float("nan")
        return float(np.corrcoef(x, y)[0, 1] ** 2)

    def to_json_dict(self, include_ledgers: bool = True) -> dict:
        out = {
            "depth": self.depth,
            "tick_units": self.tick_units,
            "n_levels": self.n_levels,
            "seed": self.seed,
            "slope_ticks_per_share": self.slope_ticks_per_share,
            "slope_dollars_per_share": self.slope_dollars_per_share,
            "impact_coeffs": list(self.impact_coeffs),
            "links": [vars(l) for l in self.links],
        }
        if include_ledgers:
            out["ledgers"] = {
                f"{s}|{d}": {
                    "bucket_end": led.bucket_end.tolist(),
                    "ofi": led.ofi.tolist(),
                    "visible": led.visible.tolist(),
                    "stealth": led.stealth.tolist(),
                    "own_signal": led.own_signal.tolist(),
                    "noise_flow": led.noise_flow.tolist(),
                    "mid_end": led.mid_end.tolist(),
                }
                for (s, d), led in sorted(self.ledgers.items())
            }
        return out


@dataclass
class StockDay:
    stock: str
    day: str
    events: list[LobEvent]
    book: BookSeries


def stock_name(i: int) -> str:
    return f"S{i:02d}"


def day_name(i: int) -> str:
    return (_BASE_DATE + _dt.timedelta(days=i)).isoformat()


class _DayBuilder:
    """Builds one stock-day of events, book rows and its ground-truth ledger."""

    def __init__(self, cfg: SynthConfig, rng: np.random.Generator, bid0: int):
        self.cfg = cfg
        self.rng = rng
        m = cfg.n_levels
        tick = cfg.tick_units
        self.tick = tick
        self.depth = cfg.depth
        self.deep_base = cfg.deep_base_mult * cfg.depth
        self.bid_px = [bid0 - tick * j for j in range(m)]
        self.ask_px = [bid0 + tick * cfg.spread_ticks + tick * j for j in range(m)]
        self.bid_sz = [cfg.depth] + [self.deep_base] * (m - 1)
        self.ask_sz = [cfg.depth] + [self.deep_base] * (m - 1)
        self.msg_rows: list[tuple] = []
        self.book_rows: list[list[int]] = []
        self.next_oid = 1
        # per-bucket accumulators, set by build()
        self.ofi: np.ndarray | None = None
        self.visible: np.ndarray | None = None
        self.stealth: np.ndarray | None = None
        self.k = 0

    # -- low-level emission ------------------------------------------------

    def _emit(self, time: float, mtype: int, size: int, price: int, direction: int) -> None:
        self.msg_rows.append((time, mtype, self.next_oid, max(size, 1), price, direction))
        self.next_oid += 1
        row = []
        for j in range(self.cfg.n_levels):
            row.extend((self.ask_px[j], self.ask_sz[j], self.bid_px[j], self.bid_sz[j]))
        self.book_rows.append(row)

    def _size_change(self, time: float, side: str, level: int, delta: int, mtype: int) -> None:
        """Resize one level at constant price and record its OFI term."""
        if delta == 0:
            return
        if side == "bid":
            self.bid_sz[level] += delta
            self.ofi[self.k, level] += delta
            price, direction = self.bid_px[level], 1
        else:
            self.ask_sz[level] += delta
            self.ofi[self.k, level] -= delta
            price, direction = self.ask_px[level], -1
        self._emit(time, mtype, abs(delta), price, direction)

    def _ladder_move(self, t1: float, t2: float, sign: int) -> int:
        """Shift the whole ladder one tick; returns the level-1 OFI cost.

        Up: the ask ladder rises first (an execution clears the touch),
        then the bid ladder follows.  The OFI term of a price rise is the
        pre-move size on the ask side and the post-move size on the bid
        side, per level.
        """
        tick = self.tick * sign
        m = self.cfg.n_levels
        if sign > 0:
            exec_size, exec_price = self.ask_sz[0], self.ask_px[0]
            for j in range(m):
                self.ask_px[j] += tick
                self.ofi[self.k, j] += self.ask_sz[j]
            self._emit(t1, EVENT_EXECUTE, exec_size, exec_price, -1)
            for j in range(m):
                self.bid_px[j] += tick
                self.ofi[self.k, j] += self.bid_sz[j]
            self._emit(t2, EVENT_ADD, self.bid_sz[0], self.bid_px[0], 1)
            return self.ask_sz[0] + self.bid_sz[0]
        exec_size, exec_price = self.bid_sz[0], self.bid_px[0]
        for j in range(m):
            self.bid_px[j] += tick
            self.ofi[self.k, j] -= self.bid_sz[j]
        self._emit(t1, EVENT_EXECUTE, exec_size, exec_price, 1)
        for j in range(m):
            self.ask_px[j] += tick
            self.ofi[self.k, j] -= self.ask_sz[j]
        self._emit(t2, EVENT_ADD, self.ask_sz[0], self.ask_px[0], -1)
        return -(self.ask_sz[0] + self.bid_sz[0])

    def _balanced_flow(self, time: float, level: int, flow: int, base: int) -> None:
        """Inject signed OFI ``flow`` at a level via the side that keeps both
        queues closest to their base size (positive flow: bid add or ask
        cancel; negative: mirror image)."""
        if flow == 0:
            return
        bid_dev = self.bid_sz[level] - base
        ask_dev = self.ask_sz[level] - base
        # candidates: cancel shrinks one queue, add grows the other; pick the
        # one that most reduces total deviation from base, cancels on ties
        if flow > 0:
            cancel_side, cancel_delta, cancel_gain = "ask", -flow, abs(ask_dev - flow) - abs(ask_dev)
            add_side, add_delta, add_gain = "bid", flow, abs(bid_dev + flow) - abs(bid_dev)
            feasible = self.ask_sz[level] - flow >= 2
        else:
            cancel_side, cancel_delta, cancel_gain = "bid", flow, abs(bid_dev + flow) - abs(bid_dev)
            add_side, add_delta, add_gain = "ask", -flow, abs(ask_dev - flow) - abs(ask_dev)
            feasible = self.bid_sz[level] + flow >= 2
        if feasible and cancel_gain <= add_gain:
            self._size_change(time, cancel_side, level, cancel_delta, EVENT_PARTIAL_CANCEL)
        else:
            self._size_change(time, add_side, level, add_delta, EVENT_ADD)

    # -- unit execution ------------------------------------------------------

    def run_bucket(self, k: int, units: list[tuple], times: np.ndarray) -> tuple[int, int]:
        """Execute one bucket's shuffled unit list; returns (visible, stealth) ticks."""
        self.k = k
        vis = ste = 0
        ti = 0
        for unit in units:
            kind = unit[0]
            if kind == "vis":
                self._ladder_move(times[ti], times[ti + 1], unit[1])
                ti += 2
                vis += unit[1]
            elif kind == "stealth":
                # shrink both touches to one share, move, then restore the
                # pre-move sizes: the cancel/refill terms cancel pairwise and
                # the move itself costs +-2, so the tick stays invisible to
                # the best-level OFI regardless of queue state
                s_a, s_b = self.ask_sz[0], self.bid_sz[0]
                self._size_change(times[ti], "ask", 0, 1 - s_a, EVENT_PARTIAL_CANCEL)
                self._size_change(times[ti + 1], "bid", 0, 1 - s_b, EVENT_PARTIAL_CANCEL)
                self._ladder_move(times[ti + 2], times[ti + 3], unit[1])
                self._size_change(times[ti + 4], "bid", 0, s_b - 1, EVENT_ADD)
                self._size_change(times[ti + 5], "ask", 0, s_a - 1, EVENT_ADD)
                ti += 6
                ste += unit[1]
            elif kind == "flow":
                _, level, flow = unit
                base = self.cfg.depth if level == 0 else self.deep_base
                self._balanced_flow(times[ti], level, flow, base)
                ti += 1
            elif kind == "pair":
                _, level, side, size = unit
                self._size_change(times[ti], side, level, size, EVENT_ADD)
                rm = EVENT_DELETE if self.rng.random() < 0.75 else EVENT_EXECUTE
                self._size_change(times[ti + 1], side, level, -size, rm)
                ti += 2
        return vis, ste

    def mid_units(self) -> float:
        return (self.bid_px[0] + self.ask_px[0]) / 2.0


def _plan_units(
    cfg: SynthConfig,
    rng: np.random.Generator,
    vis_ticks: int,
    ste_ticks: int,
    level1_flow: int,
    deep_flows: list[tuple[int, int]],
) -> list[tuple]:
    """Assemble and shuffle one bucket's unit list; returns units with event counts."""
    units: list[tuple] = []
    units += [("vis", 1 if vis_ticks > 0 else -1)] * abs(vis_ticks)
    units += [("stealth", 1 if ste_ticks > 0 else -1)] * abs(ste_ticks)
    if level1_flow:
        # small pieces keep the cancel side of the balancer feasible, so
        # touch sizes stay near the base depth
        cap = max(cfg.depth // 2, 1)
        sign = 1 if level1_flow > 0 else -1
        remaining = abs(level1_flow)
        while remaining > 0:
            piece = min(cap, remaining)
            units.append(("flow", 0, sign * piece))
            remaining -= piece
    for level, flow in deep_flows:
        if flow:
            units.append(("flow", level, flow))
    n_struct = sum({"vis": 2, "stealth": 6, "flow": 1}[u[0]] for u in units)
    target = cfg.events_per_second * cfg.bucket_seconds
    n_pairs = max(0, int(round((target - n_struct) / 2.0)))
    for _ in range(n_pairs):
        level = int(rng.integers(0, cfg.n_levels))
        side = "bid" if rng.random() < 0.5 else "ask"
        size = int(rng.integers(1, max(2, cfg.depth // 4)))
        units.append(("pair", level, side, size))
    rng.shuffle(units)
    return units


def generate(cfg: SynthConfig) -> tuple[dict[tuple[str, str], StockDay], GroundTruth]:
    """Generate event streams and ground truth for every (stock, day).

    Deterministic in the seed; each stock-day consumes its own child
    generators, so adding stocks or links never perturbs existing streams
    (sources feed targets only through their pre-drawn signal series).
    """
    cfg.validate()
    open_s, close_s = cfg.session
    n_buckets = int(round((close_s - open_s) / cfg.bucket_seconds))
    impact = list(cfg.impact_coeffs) if cfg.impact_coeffs is not None else \
        [1.0 / (2.0 * cfg.depth)] + [0.0] * (cfg.n_levels - 1)
    gt = GroundTruth(depth=cfg.depth, tick_units=cfg.tick_units,
                     n_levels=cfg.n_levels, seed=cfg.seed,
                     links=list(cfg.cross_links), impact_coeffs=impact)
    streams: dict[tuple[str, str], StockDay] = {}

    for day_i in range(cfg.n_days):
        day = day_name(day_i)
        # pass 1: exogenous per-stock draws from dedicated child generators
        own_moves = []
        noise = []
        deep_flows = []
        for s in range(cfg.n_stocks):
            sig_rng = np.random.default_rng([cfg.seed, day_i, s, 1])
            own_moves.append(np.round(sig_rng.normal(0, cfg.move_std, n_buckets)).astype(np.int64))
            # churn as a first difference: per-bucket noise has the requested
            # scale while the cumulative parked flow stays bounded by one draw
            if cfg.noise_std > 0:
                u = np.round(2.0 * cfg.depth
                             * sig_rng.normal(0, cfg.noise_std / np.sqrt(2.0), n_buckets))
                delta = np.diff(u, prepend=0.0)
            else:
                delta = np.zeros(n_buckets)
            noise.append(delta.astype(np.int64))
            if cfg.deep_flow_std > 0 and cfg.n_levels > 1:
                deep = np.round(sig_rng.normal(0, cfg.deep_flow_std, (n_buckets, cfg.n_levels - 1)))
            else:
                deep = np.zeros((n_buckets, max(cfg.n_levels - 1, 0)))
            deep_flows.append(deep.astype(np.int64))

        for s in range(cfg.n_stocks):
            rng = np.random.default_rng([cfg.seed, day_i, s, 2])
            bid0 = cfg.base_price + 50 * cfg.tick_units * s
            builder = _DayBuilder(cfg, rng, bid0)
            builder.ofi = np.zeros((n_buckets, cfg.n_levels), dtype=np.int64)
            visible = np.zeros(n_buckets, dtype=np.int64)
            stealth = np.zeros(n_buckets, dtype=np.int64)
            mid_end = np.zeros(n_buckets)
            ends = open_s + cfg.bucket_seconds * (1 + np.arange(n_buckets))

            incoming = [l for l in cfg.cross_links if l.target == s]
            if cfg.events_per_second > 0:
                # bootstrap row: the opening book state, so the first real
                # event has a comparison base and the ledger matches a
                # snapshot-based OFI computation exactly
                builder._emit(open_s + 1e-6, EVENT_ADD, builder.bid_sz[0],
                              builder.bid_px[0], 1)
            for k in range(n_buckets):
                if cfg.events_per_second <= 0:
                    mid_end[k] = builder.mid_units()
                    continue
                vis = int(own_moves[s][k])
                ste = 0
                deep_inj: dict[int, int] = {}
                for link in incoming:
                    kk = k - link.lag
                    if kk < 0:
                        continue
                    ticks = int(round(link.strength * own_moves[link.source][kk]))
                    if link.level == 1:
                        vis += ticks
                    else:
                        ste += ticks
                        flow = int(round(2.0 * cfg.depth * link.strength
                                         * own_moves[link.source][kk]))
                        lvl = link.level - 1
                        deep_inj[lvl] = deep_inj.get(lvl, 0) + flow
                # own deep churn, plus any planted deep self-impact
                flows = []
                for lvl in range(1, cfg.n_levels):
                    f = int(deep_flows[s][k, lvl - 1]) + deep_inj.get(lvl, 0)
                    if f:
                        flows.append((lvl, f))
                    if impact[lvl] != 0.0 and deep_flows[s][k, lvl - 1]:
                        ste += int(round(impact[lvl] * deep_flows[s][k, lvl - 1]))
                units = _plan_units(cfg, rng, vis, ste, int(noise[s][k]), flows)
                n_events = sum({"vis": 2, "stealth": 6, "flow": 1, "pair": 2}[u[0]] for u in units)
                t0 = open_s + k * cfg.bucket_seconds
                pad = 0.02 * cfg.bucket_seconds
                times = np.sort(rng.uniform(t0 + pad, t0 + cfg.bucket_seconds - pad, n_events))
                times = np.round(times * 1e6) / 1e6
                v, st = builder.run_bucket(k, units, times)
                visible[k], stealth[k] = v, st
                mid_end[k] = builder.mid_units()

            msg = builder.msg_rows
            events = [LobEvent(*row) for row in msg]
            if msg:
                arr = np.array(builder.book_rows, dtype=np.int64)
                book = BookSeries(
                    time=np.array([r[0] for r in msg]),
                    ask_price=arr[:, 0::4], ask_size=arr[:, 1::4],
                    bid_price=arr[:, 2::4], bid_size=arr[:, 3::4],
                )
            else:
                hole = np.empty((0, cfg.n_levels), dtype=np.int64)
                book = BookSeries(np.empty(0), hole, hole, hole, hole)
            name = stock_name(s)
            streams[(name, day)] = StockDay(stock=name, day=day, events=events, book=book)
            gt.ledgers[(name, day)] = DayLedger(
                bucket_end=ends,
                ofi=builder.ofi,
                visible=visible,
                stealth=stealth,
                own_signal=own_moves[s].copy(),
                noise_flow=builder.ofi[:, 0] - 2 * cfg.depth * visible,
                mid_end=mid_end,
            )
    return streams, gt


def write_lobster(
    streams: dict[tuple[str, str], StockDay],
    gt: GroundTruth,
    out_dir: Path | str,
) -> list[Path]:
    """Write LOBSTER-format CSV pairs plus the ground-truth JSON."""
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    paths = []
    for (stock, day), sd in sorted(streams.items()):
        stem = f"{stock}_{day}_34200000_57600000"
        msg_path = out_dir / f"{stem}_message_{gt.n_levels}.csv"
        book_path = out_dir / f"{stem}_orderbook_{gt.n_levels}.csv"
        events_to_csv(sd.events, msg_path)
        book_to_csv(sd.book, book_path)
        paths += [msg_path, book_path]
    gt_path = out_dir / "ground_truth.json"
    with open(gt_path, "w") as fh:
        json.dump(gt.to_json_dict(), fh, indent=1, sort_keys=True)
    paths.append(gt_path)
    return paths
