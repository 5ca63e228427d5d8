"""Per-trade EV / PnL / margin at the searcher's horizon, plus summaries.

EV = MR(t*) - base fees, PnL = EV - builder tips (priority fee + coinbase
transfer), margin = PnL / EV only when EV > 0. Fee conversions use the
ETH-USDT mid at slot time.
"""

from __future__ import annotations

from dataclasses import dataclass
from datetime import datetime, timedelta, timezone

import numpy as np

from .detect import ArbTrade
from .errors import PatternThreeExcluded
from .horizon import PATTERN_FLAT, SearcherProfile
from .markout import MarkoutCurve


@dataclass(frozen=True)
class TradeEconomics:
    tx_hash: str
    searcher_label: str
    builder_label: str
    block_number: int
    slot_time_ms: int
    volume_usd: float
    ev_usd: float
    pnl_usd: float
    margin: float | None
    builder_tip_usd: float
    base_fee_usd: float


def trade_economics(
    trade: ArbTrade,
    curve: MarkoutCurve,
    profile: SearcherProfile,
    eth_usd_at_slot: float,
) -> TradeEconomics:
    if profile.pattern == PATTERN_FLAT or profile.t_star_s is None:
        raise PatternThreeExcluded(profile.searcher_label)
    if curve.excluded:
        raise ValueError(f"{trade.tx_hash}: curve is excluded ({curve.exclusion_reason})")
    base_fee_usd = trade.base_fee_eth * eth_usd_at_slot
    tip_usd = trade.builder_tip_eth * eth_usd_at_slot
    ev = curve.mr_at(profile.t_star_s) - base_fee_usd
    pnl = ev - tip_usd
    margin = pnl / ev if ev > 0 else None
    return TradeEconomics(
        tx_hash=trade.tx_hash,
        searcher_label=trade.searcher_label,
        builder_label=trade.builder_label,
        block_number=trade.block_number,
        slot_time_ms=trade.slot_time_ms,
        volume_usd=trade.volume_usd,
        ev_usd=ev,
        pnl_usd=pnl,
        margin=margin,
        builder_tip_usd=tip_usd,
        base_fee_usd=base_fee_usd,
    )


@dataclass
class SearcherSummary:
    label: str
    total_volume_usd: float
    total_ev_usd: float
    total_tips_usd: float
    total_pnl_usd: float
    median_trade_ev: float | None
    median_trade_pnl: float | None
    median_margin: float | None
    count_total: int
    count_inventory_adj: int
    count_quote_gap: int
    count_arbitrage: int
    count_profitable: int
    count_unprofitable: int


def searcher_summary(
    label: str,
    economics: list[TradeEconomics],
    n_inventory_adj: int = 0,
    n_quote_gap: int = 0,
) -> SearcherSummary:
    """Totals and per-trade medians for one searcher.

    Margin medians cover only margin-defined trades; EV/PnL medians cover
    every arbitrage trade. Excluded trades contribute to counts only.
    """
    evs = np.array([e.ev_usd for e in economics]) if economics else np.array([])
    pnls = np.array([e.pnl_usd for e in economics]) if economics else np.array([])
    margins = [e.margin for e in economics if e.margin is not None]
    n_arb = len(economics)
    profitable = int(sum(1 for e in economics if e.pnl_usd >= 0))
    return SearcherSummary(
        label=label,
        total_volume_usd=float(sum(e.volume_usd for e in economics)),
        total_ev_usd=float(evs.sum()) if n_arb else 0.0,
        total_tips_usd=float(sum(e.builder_tip_usd for e in economics)),
        total_pnl_usd=float(pnls.sum()) if n_arb else 0.0,
        median_trade_ev=float(np.median(evs)) if n_arb else None,
        median_trade_pnl=float(np.median(pnls)) if n_arb else None,
        median_margin=float(np.median(margins)) if margins else None,
        count_total=n_arb + n_inventory_adj + n_quote_gap,
        count_inventory_adj=n_inventory_adj,
        count_quote_gap=n_quote_gap,
        count_arbitrage=n_arb,
        count_profitable=profitable,
        count_unprofitable=n_arb - profitable,
    )


def _utc_day(ts_ms: int) -> str:
    return datetime.fromtimestamp(ts_ms / 1000, tz=timezone.utc).strftime("%Y-%m-%d")


def _iso_week(ts_ms: int) -> str:
    iso = datetime.fromtimestamp(ts_ms / 1000, tz=timezone.utc).isocalendar()
    return f"{iso.year}-W{iso.week:02d}"


def cumulative_ev_series(
    economics: list[TradeEconomics], bucketing: str = "daily"
) -> dict[str, list[tuple[str, float, float]]]:
    """Per-searcher (bucket, ev_sum, cumulative_ev) series.

    Daily buckets are UTC calendar days; weekly buckets are ISO weeks
    (Monday start). Empty buckets between trades are emitted with 0.
    """
    if bucketing not in ("daily", "weekly"):
        raise ValueError(f"unknown bucketing {bucketing!r}")
    by_searcher: dict[str, dict[str, float]] = {}
    for e in economics:
        key = _utc_day(e.slot_time_ms) if bucketing == "daily" else _iso_week(e.slot_time_ms)
        buckets = by_searcher.setdefault(e.searcher_label, {})
        buckets[key] = buckets.get(key, 0.0) + e.ev_usd

    out: dict[str, list[tuple[str, float, float]]] = {}
    for label, buckets in by_searcher.items():
        keys = _fill_buckets(sorted(buckets), bucketing)
        rows = []
        cum = 0.0
        for k in keys:
            v = buckets.get(k, 0.0)
            cum += v
            rows.append((k, v, cum))
        out[label] = rows
    return out


def _fill_buckets(sorted_keys: list[str], bucketing: str) -> list[str]:
    if not sorted_keys:
        return []
    if bucketing == "daily":
        start = datetime.strptime(sorted_keys[0], "%Y-%m-%d").replace(tzinfo=timezone.utc)
        end = datetime.strptime(sorted_keys[-1], "%Y-%m-%d").replace(tzinfo=timezone.utc)
        days = (end - start).days
        return [(start + timedelta(days=i)).strftime("%Y-%m-%d") for i in range(days + 1)]
    # weekly: walk Mondays between the first and last ISO week
    def monday(key: str) -> datetime:
        year, week = key.split("-W")
        return datetime.fromisocalendar(int(year), int(week), 1).replace(tzinfo=timezone.utc)

    cur, last = monday(sorted_keys[0]), monday(sorted_keys[-1])
    keys = []
    while cur <= last:
        iso = cur.isocalendar()
        keys.append(f"{iso.year}-W{iso.week:02d}")
        cur += timedelta(days=7)
    return keys
