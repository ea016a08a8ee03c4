"""Seeded synthetic market generator.

Produces a deterministic GBM-style daily panel: same seed, same store, bit
for bit. Boards are assigned round-robin across the four exchanges; ticker
numerics skip multiples of 100 so that round-lot volume and share counts can
never collide with a ticker code in the leak scanner.
"""
from __future__ import annotations

import datetime as dt

import numpy as np

from .market import Bar, Board, MarketStore, TradingCalendar

#: drift per day, (low, high) annualized-ish daily vol band
REGIME_PROFILES = {
    "default": (0.0002, 0.006, 0.030),
    "bull": (0.0015, 0.006, 0.030),
    "bear": (-0.0015, 0.006, 0.030),
    "calm": (0.0001, 0.002, 0.008),
    "volatile": (0.0, 0.020, 0.045),
}

_EPOCH = dt.date(2021, 1, 4)  # a Monday

_BOARD_BASES = (
    (Board.MAIN, "SH", 600000),
    (Board.CHINEXT, "SZ", 300000),
    (Board.STAR, "SH", 688000),
    (Board.BSE, "BJ", 830000),
)


def _weekday_calendar(n_days: int) -> TradingCalendar:
    dates = []
    d = _EPOCH
    while len(dates) < n_days:
        if d.weekday() < 5:
            dates.append(d)
        d += dt.timedelta(days=1)
    return TradingCalendar(dates)


def _tickers(n_stocks: int) -> list[str]:
    out = []
    counters = [0, 0, 0, 0]
    for i in range(n_stocks):
        slot = i % 4
        board, prefix, base = _BOARD_BASES[slot]
        counters[slot] += 1
        while counters[slot] % 100 == 0:
            counters[slot] += 1
        code = base + counters[slot]
        if board is Board.STAR and code > 688999:
            raise ValueError("too many STAR-board names for the 688xxx range")
        out.append(f"{prefix}{code:06d}")
    return out


def synth_market(seed: int, n_stocks: int, n_days: int, regime: str = "default") -> MarketStore:
    """Generate a complete daily panel of `n_stocks` x `n_days` bars."""
    if n_stocks < 2:
        raise ValueError("n_stocks must be at least 2")
    if n_days < 300:
        raise ValueError("n_days must be at least 300 to support 252-day factors")
    if regime not in REGIME_PROFILES:
        raise ValueError(f"unknown regime {regime!r}; choose from {sorted(REGIME_PROFILES)}")
    mu, vol_lo, vol_hi = REGIME_PROFILES[regime]

    rng = np.random.default_rng(seed)
    calendar = _weekday_calendar(n_days)
    tickers = _tickers(n_stocks)

    bars: list[Bar] = []
    for t in tickers:
        s0 = float(rng.uniform(4.0, 90.0))
        vol = float(rng.uniform(vol_lo, vol_hi))
        shocks = rng.standard_normal(n_days)
        log_rets = (mu - 0.5 * vol * vol) + vol * shocks
        closes = s0 * np.exp(np.cumsum(log_rets))
        closes = np.maximum(np.round(closes, 2), 0.10)

        gaps = rng.normal(0.0, vol / 3.0, n_days)
        spans_hi = np.abs(rng.normal(0.0, vol / 2.0, n_days))
        spans_lo = np.abs(rng.normal(0.0, vol / 2.0, n_days))
        vol_draws = rng.lognormal(13.0, 0.7, n_days)
        amt_noise = rng.uniform(0.98, 1.02, n_days)

        prev = closes[0]
        for d in range(n_days):
            c = float(closes[d])
            o = max(round(float(prev * np.exp(gaps[d])), 2), 0.10)
            hi = round(max(o, c) * (1.0 + float(spans_hi[d])), 2)
            lo = round(min(o, c) * (1.0 - float(spans_lo[d])), 2)
            hi = max(hi, o, c)
            lo = max(min(lo, o, c), 0.01)
            volume = float((int(vol_draws[d]) // 100) * 100 + 100)
            vwap = (o + hi + lo + c) / 4.0
            amount = round(vwap * volume * float(amt_noise[d]), 2)
            bars.append(Bar(t, calendar.date(d), o, hi, lo, c, volume, amount))
            prev = c

    return MarketStore(bars, calendar=calendar, market_id=f"synth-{seed}-{n_stocks}x{n_days}-{regime}")
