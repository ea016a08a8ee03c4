"""Market data store: bars, trading calendar, board classification.

Everything downstream (masking, execution, tools, attribution) reads from an
immutable :class:`MarketStore`. Dates are handled as indices into the store's
:class:`TradingCalendar` everywhere inside the package; ISO-8601 strings only
appear at I/O boundaries.
"""
from __future__ import annotations

import datetime as dt
import re
from bisect import bisect_left, bisect_right
from dataclasses import dataclass
from enum import Enum

import numpy as np

TICKER_RE = re.compile(r"^(SH|SZ|BJ)?(\d{6})$")


class Board(Enum):
    MAIN = "MAIN"
    CHINEXT = "CHINEXT"
    STAR = "STAR"
    BSE = "BSE"


#: Daily price-limit fraction applied by the executor, per board.
BOARD_LIMIT_PCT = {
    Board.MAIN: 0.095,
    Board.CHINEXT: 0.195,
    Board.STAR: 0.195,
    Board.BSE: 0.295,
}


@dataclass(frozen=True)
class BoardClass:
    board: Board
    limit_pct: float


def classify_board(ticker: str) -> BoardClass:
    """Classify a ticker into its exchange board and price-limit band.

    Accepts a bare 6-digit code or one prefixed with SH/SZ/BJ. The numeric
    prefix decides the board: 688xxx STAR, other 6xxxxx and 00xxxx MAIN,
    30xxxx ChiNext, 8xxxxx/4xxxxx BSE. Anything else is rejected.
    """
    m = TICKER_RE.match(ticker)
    if not m:
        raise ValueError(f"unrecognized ticker format: {ticker!r}")
    code = m.group(2)
    if code.startswith("688"):
        board = Board.STAR
    elif code.startswith(("6", "00")):
        board = Board.MAIN
    elif code.startswith("30"):
        board = Board.CHINEXT
    elif code.startswith(("8", "4")):
        board = Board.BSE
    else:
        raise ValueError(f"ticker {ticker!r} has no recognized board prefix")
    return BoardClass(board, BOARD_LIMIT_PCT[board])


@dataclass(frozen=True)
class Bar:
    """One daily OHLCV record. Prices in CNY, volume in shares, amount in CNY."""

    ticker: str
    date: dt.date
    open: float
    high: float
    low: float
    close: float
    volume: float
    amount: float

    def validate(self) -> None:
        prices = (self.open, self.high, self.low, self.close)
        if any(p <= 0 for p in prices):
            raise ValueError(f"{self.ticker} {self.date}: non-positive price")
        if not (self.low <= min(self.open, self.close) <= max(self.open, self.close) <= self.high):
            raise ValueError(f"{self.ticker} {self.date}: OHLC ordering violated")
        if self.volume < 0 or self.amount < 0:
            raise ValueError(f"{self.ticker} {self.date}: negative volume/amount")


class TradingCalendar:
    """Strictly increasing sequence of trading days with two-way index lookup."""

    def __init__(self, dates: list[dt.date]):
        if not dates:
            raise ValueError("calendar must contain at least one date")
        for a, b in zip(dates, dates[1:]):
            if a >= b:
                raise ValueError("calendar dates must be strictly increasing")
        self._dates: tuple[dt.date, ...] = tuple(dates)
        self._index = {d: i for i, d in enumerate(self._dates)}

    def __len__(self) -> int:
        return len(self._dates)

    def __contains__(self, d: dt.date) -> bool:
        return d in self._index

    def date(self, idx: int) -> dt.date:
        if idx < 0 or idx >= len(self._dates):
            raise IndexError(f"calendar index {idx} out of range 0..{len(self._dates) - 1}")
        return self._dates[idx]

    def index(self, d: dt.date) -> int:
        try:
            return self._index[d]
        except KeyError:
            raise KeyError(f"{d.isoformat()} is not a trading day") from None

    def rank(self, d: dt.date) -> int:
        """Number of trading days strictly before `d` (works for non-members)."""
        return bisect_left(self._dates, d)

    def trading_day_distance(self, a: dt.date, b: dt.date) -> int:
        """Distance between two dates counted in trading days.

        Members use their exact index; non-members use the insertion rank, so
        a weekend guess lands between its neighbouring trading days.
        """
        ia = self._index.get(a, self.rank(a))
        ib = self._index.get(b, self.rank(b))
        return abs(ia - ib)

    @property
    def dates(self) -> tuple[dt.date, ...]:
        return self._dates


@dataclass(frozen=True)
class UniverseSnapshot:
    asof: int
    members: tuple[str, ...]

    @property
    def size(self) -> int:
        return len(self.members)


class _Series:
    """Per-ticker column arrays aligned by calendar index (may be sparse)."""

    __slots__ = ("day_idx", "open", "high", "low", "close", "volume", "amount")

    def __init__(self, day_idx, o, h, l, c, v, a):
        self.day_idx = np.asarray(day_idx, dtype=np.int64)
        self.open = np.asarray(o, dtype=np.float64)
        self.high = np.asarray(h, dtype=np.float64)
        self.low = np.asarray(l, dtype=np.float64)
        self.close = np.asarray(c, dtype=np.float64)
        self.volume = np.asarray(v, dtype=np.float64)
        self.amount = np.asarray(a, dtype=np.float64)

    def pos_of(self, day_idx: int) -> int | None:
        """Array position of the bar at exactly `day_idx`, or None."""
        p = int(np.searchsorted(self.day_idx, day_idx))
        if p < len(self.day_idx) and self.day_idx[p] == day_idx:
            return p
        return None

    def pos_before(self, day_idx: int) -> int:
        """Number of bars strictly before `day_idx`."""
        return int(np.searchsorted(self.day_idx, day_idx))


class MarketStore:
    """Immutable daily-bar store with derived-feature caches.

    Construction is single-threaded; after that the store is read-only and
    safe to share across concurrent readers (the internal feature caches are
    idempotent per-day memos).
    """

    def __init__(
        self,
        bars: list[Bar],
        calendar: TradingCalendar | None = None,
        membership: dict[str, list[tuple[dt.date, dt.date | None]]] | None = None,
        market_id: str = "market",
    ):
        if not bars:
            raise ValueError("store needs at least one bar")
        seen: set[tuple[str, dt.date]] = set()
        for b in bars:
            b.validate()
            key = (b.ticker, b.date)
            if key in seen:
                raise ValueError(f"duplicate bar for {b.ticker} on {b.date}")
            seen.add(key)
        if calendar is None:
            calendar = TradingCalendar(sorted({b.date for b in bars}))
        else:
            for b in bars:
                if b.date not in calendar:
                    raise ValueError(f"bar date {b.date} for {b.ticker} not in calendar")
        self.calendar = calendar
        self.market_id = market_id

        by_ticker: dict[str, list[Bar]] = {}
        for b in bars:
            by_ticker.setdefault(b.ticker, []).append(b)
        self.tickers: tuple[str, ...] = tuple(sorted(by_ticker))
        if len(self.tickers) > 10_000:
            raise ValueError("universes above 10,000 names are not supported")
        self.boards: dict[str, BoardClass] = {t: classify_board(t) for t in self.tickers}

        self._series: dict[str, _Series] = {}
        for t, blist in by_ticker.items():
            blist.sort(key=lambda b: b.date)
            idx = [calendar.index(b.date) for b in blist]
            self._series[t] = _Series(
                idx,
                [b.open for b in blist],
                [b.high for b in blist],
                [b.low for b in blist],
                [b.close for b in blist],
                [b.volume for b in blist],
                [b.amount for b in blist],
            )

        self._membership = None
        if membership is not None:
            self._membership = {
                t: [(calendar.rank(lo), (calendar.rank(hi) if hi is not None else len(calendar)))
                    for lo, hi in spans]
                for t, spans in membership.items()
            }

        self._feature_cache: dict[int, dict] = {}
        self._style_cache: dict[int, dict] = {}
        self._index_returns: np.ndarray | None = None

    # -- raw access ---------------------------------------------------------

    def series(self, ticker: str) -> _Series:
        try:
            return self._series[ticker]
        except KeyError:
            raise KeyError(f"unknown ticker {ticker!r}") from None

    def has_ticker(self, ticker: str) -> bool:
        return ticker in self._series

    def has_bar(self, ticker: str, day_idx: int) -> bool:
        s = self._series.get(ticker)
        return s is not None and s.pos_of(day_idx) is not None

    def bar(self, ticker: str, day_idx: int) -> Bar:
        s = self.series(ticker)
        p = s.pos_of(day_idx)
        if p is None:
            raise KeyError(f"{ticker} has no bar at calendar index {day_idx}")
        return Bar(
            ticker,
            self.calendar.date(day_idx),
            float(s.open[p]),
            float(s.high[p]),
            float(s.low[p]),
            float(s.close[p]),
            float(s.volume[p]),
            float(s.amount[p]),
        )

    def close_at_or_before(self, ticker: str, day_idx: int) -> tuple[float, int] | None:
        """Most recent close at or before `day_idx`, with its calendar index."""
        s = self._series.get(ticker)
        if s is None:
            return None
        p = bisect_right(s.day_idx.tolist(), day_idx) - 1
        if p < 0:
            return None
        return float(s.close[p]), int(s.day_idx[p])

    def universe(self, day_idx: int) -> UniverseSnapshot:
        """Members on a day. Without a membership table the full store counts."""
        if self._membership is None:
            return UniverseSnapshot(day_idx, self.tickers)
        members = tuple(
            t for t in self.tickers
            if any(lo <= day_idx < hi for lo, hi in self._membership.get(t, []))
        )
        return UniverseSnapshot(day_idx, members)

    # -- equal-weight index proxy --------------------------------------------

    def index_daily_returns(self) -> np.ndarray:
        """Equal-weight daily-rebalanced universe return series, one per calendar day.

        Day 0 is 0.0; day d averages close[d]/close[d-1] - 1 over tickers with
        bars on both days.
        """
        if self._index_returns is None:
            n = len(self.calendar)
            out = np.zeros(n, dtype=np.float64)
            for d in range(1, n):
                vals = []
                for t in self.tickers:
                    s = self._series[t]
                    p = s.pos_of(d)
                    q = s.pos_of(d - 1)
                    if p is not None and q is not None:
                        vals.append(s.close[p] / s.close[q] - 1.0)
                out[d] = float(np.mean(vals)) if vals else 0.0
            self._index_returns = out
        return self._index_returns

    def index_return(self, end_idx: int, lookback: int) -> float:
        """Compound index return over the `lookback` days ending at `end_idx`."""
        rets = self.index_daily_returns()
        lo = max(1, end_idx - lookback + 1)
        if end_idx < 1 or lo > end_idx:
            return 0.0
        seg = rets[lo:end_idx + 1]
        return float(np.prod(1.0 + seg) - 1.0)

    # -- derived features (delegates, cached per day) -------------------------

    def features(self, asof_idx: int, tickers=None):
        from .features import compute_features

        cache = self._feature_cache.get(asof_idx)
        if cache is None:
            rows = compute_features(self, asof_idx, self.tickers)
            cache = {r.ticker: r for r in rows}
            self._feature_cache[asof_idx] = cache
        if tickers is None:
            tickers = self.universe(asof_idx).members
        from .features import missing_feature_row

        return [cache.get(t) or missing_feature_row(t, asof_idx) for t in tickers]

    def style_exposures(self, asof_idx: int, tickers=None):
        from .styles import compute_style_exposures

        cache = self._style_cache.get(asof_idx)
        if cache is None:
            rows = compute_style_exposures(self, asof_idx, self.tickers)
            cache = {r.ticker: r for r in rows}
            self._style_cache[asof_idx] = cache
        if tickers is None:
            tickers = self.universe(asof_idx).members
        from .styles import missing_style_row

        return [cache.get(t) or missing_style_row(t, asof_idx) for t in tickers]
