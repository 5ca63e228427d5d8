"""Time-indexed CEX quote store.

Lookups are last-quote-at-or-before (step function, right-continuous); no
interpolation, since markouts need executable prices rather than smoothed
ones. A lookup older than the staleness bound raises StaleQuote, which the
markout stage turns into trade exclusion.
"""

from __future__ import annotations

import numpy as np

from . import _kernels
from .data_model import Quote, TokenRegistry
from .errors import NoQuoteBefore, StaleQuote, UnknownToken, UnlistedToken


class QuoteSeries:
    """One symbol's quotes as sorted parallel arrays."""

    def __init__(self, symbol: str, quotes: list[Quote]):
        self.symbol = symbol
        self.ts_ms = np.array([q.ts_ms for q in quotes], dtype=np.int64)
        self.bid = np.array([q.bid for q in quotes], dtype=np.float64)
        self.ask = np.array([q.ask for q in quotes], dtype=np.float64)
        if np.any(np.diff(self.ts_ms) <= 0):
            raise ValueError(f"{symbol}: timestamps not strictly increasing")

    def __len__(self) -> int:
        return len(self.ts_ms)

    def mid_at(self, t_ms: int, staleness_ms: int) -> float:
        mids, status = _kernels.step_mid_lookup(
            self.ts_ms, self.bid, self.ask,
            np.asarray([t_ms], dtype=np.int64), staleness_ms,
        )
        if status[0] == _kernels.LOOKUP_NO_QUOTE:
            raise NoQuoteBefore(t_ms)
        if status[0] == _kernels.LOOKUP_STALE:
            idx = int(np.searchsorted(self.ts_ms, t_ms, side="right")) - 1
            raise StaleQuote(int(t_ms - self.ts_ms[idx]))
        return float(mids[0])

    def mid_many(self, ts: np.ndarray, staleness_ms: int) -> tuple[np.ndarray, np.ndarray]:
        """Vectorized lookup; returns (mids, status codes) without raising."""
        return _kernels.step_mid_lookup(
            self.ts_ms, self.bid, self.ask, np.asarray(ts, dtype=np.int64), staleness_ms
        )


def mid_price(series: QuoteSeries, t_ms: int, staleness_ms: int) -> float:
    return series.mid_at(t_ms, staleness_ms)


class QuoteStore:
    def __init__(self, series_by_symbol: dict[str, list[Quote]]):
        self.series = {
            sym: QuoteSeries(sym, quotes) for sym, quotes in series_by_symbol.items()
        }

    def get(self, symbol: str) -> QuoteSeries:
        s = self.series.get(symbol)
        if s is None:
            raise NoQuoteBefore(0)
        return s

    def mid(self, symbol: str, t_ms: int, staleness_ms: int) -> float:
        return self.get(symbol).mid_at(t_ms, staleness_ms)

    def eth_usd(self, t_ms: int, staleness_ms: int) -> float:
        return self.mid("ETHUSDT", t_ms, staleness_ms)

    def usd_price(
        self, token: str, t_ms: int, registry: TokenRegistry, staleness_ms: int
    ) -> float:
        """Token USD valuation via its Binance USDT pair; USDT pegged at 1."""
        info = registry.get(token)
        if info is None:
            raise UnknownToken(token)
        if not info.cex_listed:
            raise UnlistedToken(token)
        if info.quote_symbol == "USDT":
            return 1.0
        return self.mid(f"{info.quote_symbol}USDT", t_ms, staleness_ms)


def usd_price(
    token: str, t_ms: int, registry: TokenRegistry, store: QuoteStore,
    staleness_ms: int = 5000,
) -> float:
    return store.usd_price(token, t_ms, registry, staleness_ms)


def eth_usd(t_ms: int, store: QuoteStore, staleness_ms: int = 5000) -> float:
    return store.eth_usd(t_ms, staleness_ms)
