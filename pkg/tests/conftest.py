import datetime as dt

import pytest

from masktrade.data import synth_market
from masktrade.data.market import Bar, MarketStore


def flat_bar(ticker, date, px, vol=10000.0, amount=None):
    return Bar(ticker, date, px, px, px, px, vol, amount if amount is not None else round(px * vol, 2))


def make_flat_store(tickers=("SH600001", "SH600002"), n_days=12, px=10.0, start=dt.date(2024, 1, 1)):
    """Constant-price store on a gapless daily calendar."""
    bars = []
    for t in tickers:
        for i in range(n_days):
            bars.append(flat_bar(t, start + dt.timedelta(days=i), px))
    return MarketStore(bars)


def make_path_store(paths: dict, start=dt.date(2024, 1, 1), volume=10000.0):
    """Store where each ticker follows an explicit close-price path.

    Opens equal the previous close (day 0 opens at its close), so limit
    behaviour is driven purely by the close path.
    """
    n = max(len(p) for p in paths.values())
    bars = []
    for t, closes in paths.items():
        prev = closes[0]
        for i, c in enumerate(closes):
            o = prev
            hi = max(o, c)
            lo = min(o, c)
            bars.append(Bar(t, start + dt.timedelta(days=i), o, hi, lo, c, volume, round(c * volume, 2)))
            prev = c
    return MarketStore(bars)


@pytest.fixture(scope="session")
def small_store():
    return synth_market(5, 12, 330)


@pytest.fixture(scope="session")
def mid_store():
    return synth_market(7, 30, 340)


@pytest.fixture()
def flat_store():
    return make_flat_store()
