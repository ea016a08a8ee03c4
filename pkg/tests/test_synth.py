import numpy as np
import pytest

from masktrade.data import synth_market
from masktrade.data.market import Board


def test_same_seed_bit_identical():
    a = synth_market(1, 10, 300)
    b = synth_market(1, 10, 300)
    assert a.tickers == b.tickers
    for t in a.tickers:
        sa, sb = a.series(t), b.series(t)
        for col in ("open", "high", "low", "close", "volume", "amount"):
            assert np.array_equal(getattr(sa, col), getattr(sb, col))


def test_different_seeds_differ():
    a = synth_market(1, 6, 300)
    b = synth_market(2, 6, 300)
    assert not np.array_equal(a.series(a.tickers[0]).close, b.series(b.tickers[0]).close)


def test_bull_regime_positive_index_return():
    store = synth_market(1, 50, 400, "bull")
    rets = store.index_daily_returns()
    total = float(np.prod(1.0 + rets) - 1.0)
    assert total > 0.0


def test_min_days_precondition():
    with pytest.raises(ValueError, match="300"):
        synth_market(1, 10, 100)
    with pytest.raises(ValueError):
        synth_market(1, 1, 300)


def test_boards_round_robin():
    store = synth_market(3, 8, 300)
    counts = {b: 0 for b in Board}
    for t in store.tickers:
        counts[store.boards[t].board] += 1
    assert all(c == 2 for c in counts.values())


def test_ticker_numerics_never_round_lots():
    """Volume and share counts are multiples of 100; ticker codes never are,
    so the leak scanner cannot false-positive on them."""
    store = synth_market(9, 200, 300)
    for t in store.tickers:
        assert int(t[-6:]) % 100 != 0
        assert np.all(store.series(t).volume % 100 == 0)


def test_bars_validate_and_prices_positive():
    store = synth_market(11, 20, 310)
    for t in store.tickers:
        s = store.series(t)
        assert np.all(s.low <= np.minimum(s.open, s.close) + 1e-12)
        assert np.all(np.maximum(s.open, s.close) <= s.high + 1e-12)
        assert np.all(s.low > 0)


def test_unknown_regime():
    with pytest.raises(ValueError, match="regime"):
        synth_market(1, 5, 300, "sideways-chop")
