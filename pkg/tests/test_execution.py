import datetime as dt
import random
from decimal import Decimal

import pytest

from masktrade.data.market import Bar, MarketStore
from masktrade.execution import (
    Account,
    Order,
    RejectReason,
    Side,
    mark,
    score_portfolio_step,
    step,
    unlock_t1,
)

from conftest import flat_bar, make_flat_store


def one_name_store(closes, opens=None, ticker="SH600001"):
    base = dt.date(2024, 1, 1)
    bars = []
    prev = closes[0]
    for i, c in enumerate(closes):
        o = opens[i] if opens else prev
        bars.append(Bar(ticker, base + dt.timedelta(days=i), o, max(o, c), min(o, c), c, 1_000_000.0,
                        round(c * 1e6, 2)))
        prev = c
    return MarketStore(bars)


class TestCosts:
    def test_buy_cost_five_bps(self, flat_store):
        acc = Account.with_cash(1_000_000)
        fills, _ = step(acc, [Order("SH600001", Side.BUY, shares=10_000)], 0, flat_store)
        assert fills[0].notional == Decimal("100000.00")
        assert fills[0].cost == Decimal("50.00")

    def test_min_cost_floor(self, flat_store):
        acc = Account.with_cash(1_000_000)
        fills, _ = step(acc, [Order("SH600001", Side.BUY, shares=500)], 0, flat_store)
        assert fills[0].notional == Decimal("5000.00")
        assert fills[0].cost == Decimal("5.00")

    def test_sell_cost_fifteen_bps(self, flat_store):
        acc = Account.with_cash(1_000_000)
        step(acc, [Order("SH600001", Side.BUY, shares=10_000)], 0, flat_store)
        unlock_t1(acc)
        fills, _ = step(acc, [Order("SH600001", Side.SELL, shares=10_000)], 1, flat_store)
        assert fills[0].cost == Decimal("150.00")


class TestTPlusOne:
    def test_same_step_sell_locked(self, flat_store):
        acc = Account.with_cash(1_000_000)
        _, rejs = step(acc, [Order("SH600001", Side.BUY, shares=1000),
                             Order("SH600001", Side.SELL, shares=1000)], 0, flat_store)
        assert rejs[0].reason is RejectReason.T1_LOCKED

    def test_next_step_sell_allowed(self, flat_store):
        acc = Account.with_cash(1_000_000)
        step(acc, [Order("SH600001", Side.BUY, shares=1000)], 0, flat_store)
        unlock_t1(acc)
        fills, rejs = step(acc, [Order("SH600001", Side.SELL, shares=1000)], 1, flat_store)
        assert fills and not rejs

    def test_partial_lock(self, flat_store):
        acc = Account.with_cash(1_000_000)
        step(acc, [Order("SH600001", Side.BUY, shares=1000)], 0, flat_store)
        unlock_t1(acc)
        fills, _ = step(acc, [Order("SH600001", Side.BUY, shares=500),
                              Order("SH600001", Side.SELL, shares=1500)], 1, flat_store)
        sell = [f for f in fills if f.side is Side.SELL][0]
        assert sell.shares == 1000  # today's 500 still locked
        assert sell.note == "clipped to sellable shares"


class TestPriceLimits:
    @pytest.mark.parametrize("ticker,pct", [
        ("SH600001", 0.095), ("SZ300001", 0.195), ("SH688001", 0.195), ("BJ830001", 0.295),
    ])
    def test_board_thresholds_buy(self, ticker, pct):
        limit_open = round(10.0 * (1.0 + pct + 0.001), 4)
        # close pulls back intraday so the session is not one-sided
        store = one_name_store([10.0, 10.0, round(limit_open * 0.99, 4)],
                               opens=[10.0, 10.0, limit_open], ticker=ticker)
        acc = Account.with_cash(1_000_000)
        _, rejs = step(acc, [Order(ticker, Side.BUY, shares=100)], 1, store)
        assert rejs and rejs[0].reason is RejectReason.LIMIT_UP_BUY

    @pytest.mark.parametrize("ticker,pct", [
        ("SH600001", 0.095), ("BJ830001", 0.295),
    ])
    def test_board_thresholds_sell(self, ticker, pct):
        limit_open = round(10.0 * (1.0 - pct - 0.001), 4)
        store = one_name_store([10.0, 10.0, round(limit_open * 1.01, 4)],
                               opens=[10.0, 10.0, limit_open], ticker=ticker)
        acc = Account.with_cash(1_000_000)
        step(acc, [Order(ticker, Side.BUY, shares=100)], 0, store)
        unlock_t1(acc)
        _, rejs = step(acc, [Order(ticker, Side.SELL, shares=100)], 1, store)
        assert rejs and rejs[0].reason is RejectReason.LIMIT_DOWN_SELL

    def test_just_under_threshold_fills(self):
        store = one_name_store([10.0, 10.0, 10.90], opens=[10.0, 10.0, 10.94])
        acc = Account.with_cash(1_000_000)
        fills, rejs = step(acc, [Order("SH600001", Side.BUY, shares=100)], 1, store)
        assert fills and not rejs

    def test_at_threshold_rejected(self):
        # next open at prev_close * 1.096, just past the 9.5% band
        store = one_name_store([10.0, 10.0, 10.90], opens=[10.0, 10.0, 10.96])
        acc = Account.with_cash(1_000_000)
        _, rejs = step(acc, [Order("SH600001", Side.BUY, shares=100)], 1, store)
        assert rejs[0].reason is RejectReason.LIMIT_UP_BUY

    def test_one_sided_day_unfillable_both_ways(self):
        base = dt.date(2024, 1, 1)
        bars = [flat_bar("SH600001", base, 10.0), flat_bar("SH600001", base + dt.timedelta(days=1), 10.0)]
        # day 2: open == high == low pinned at the up limit
        bars.append(Bar("SH600001", base + dt.timedelta(days=2), 11.0, 11.0, 11.0, 11.0, 100.0, 1100.0))
        store = MarketStore(bars)
        acc = Account.with_cash(1_000_000)
        step(acc, [Order("SH600001", Side.BUY, shares=100)], 0, store)
        unlock_t1(acc)
        fills, rejs = step(acc, [Order("SH600001", Side.BUY, shares=100),
                                 Order("SH600001", Side.SELL, shares=100)], 1, store)
        assert not fills
        assert {r.reason for r in rejs} == {RejectReason.UNFILLABLE_ONE_SIDED}


class TestResolution:
    def test_target_weight_rounds_to_lots(self, flat_store):
        acc = Account.with_cash(1_000_000)
        fills, _ = step(acc, [Order("SH600001", Side.BUY, target_weight=0.105)], 0, flat_store)
        assert fills[0].shares == 10_500

    def test_buy_already_at_target_rejected(self, flat_store):
        acc = Account.with_cash(1_000_000)
        step(acc, [Order("SH600001", Side.BUY, target_weight=0.10)], 0, flat_store)
        unlock_t1(acc)
        _, rejs = step(acc, [Order("SH600001", Side.BUY, target_weight=0.05)], 1, flat_store)
        assert rejs[0].reason is RejectReason.INSUFFICIENT_CASH
        assert "0 lots" in rejs[0].detail

    def test_sell_to_zero_exits_fully(self, flat_store):
        acc = Account.with_cash(1_000_000)
        step(acc, [Order("SH600001", Side.BUY, target_weight=0.10)], 0, flat_store)
        unlock_t1(acc)
        fills, _ = step(acc, [Order("SH600001", Side.SELL, target_weight=0.0)], 1, flat_store)
        assert fills[0].shares == 10_000
        assert "SH600001" not in acc.positions

    def test_cash_buffer_truncates_oversized_buy(self, flat_store):
        acc = Account.with_cash(100_000)
        fills, _ = step(acc, [Order("SH600001", Side.BUY, shares=10_000)], 0, flat_store)
        assert fills[0].note == "partially filled down to affordable lots"
        assert acc.cash >= Decimal("1000.00")  # 1% of NAV preserved
        assert fills[0].shares < 10_000

    def test_unaffordable_single_lot_rejected(self, flat_store):
        acc = Account.with_cash(900)
        _, rejs = step(acc, [Order("SH600001", Side.BUY, shares=100)], 0, flat_store)
        assert rejs[0].reason is RejectReason.INSUFFICIENT_CASH

    def test_sell_unheld_rejected(self, flat_store):
        acc = Account.with_cash(1_000_000)
        _, rejs = step(acc, [Order("SH600001", Side.SELL, shares=100)], 0, flat_store)
        assert rejs[0].reason is RejectReason.INSUFFICIENT_SHARES

    def test_unknown_ticker_not_in_universe(self, flat_store):
        acc = Account.with_cash(1_000_000)
        _, rejs = step(acc, [Order("SH999999", Side.SELL, shares=100)], 0, flat_store)
        assert rejs[0].reason is RejectReason.NOT_IN_UNIVERSE

    def test_every_order_answered_in_sequence(self, flat_store):
        acc = Account.with_cash(1_000_000)
        orders = [
            Order("SH600001", Side.BUY, shares=100),
            Order("SH999999", Side.BUY, shares=100),
            Order("SH600002", Side.BUY, shares=100),
        ]
        fills, rejs = step(acc, orders, 0, flat_store)
        assert len(fills) + len(rejs) == 3
        assert fills[0].ticker == "SH600001" and fills[1].ticker == "SH600002"


class TestMark:
    def test_empty_account(self, flat_store):
        acc = Account.with_cash(1_000_000)
        assert mark(acc, 0, flat_store) == Decimal("1000000.00")

    def test_position_moves_with_close(self):
        store = one_name_store([10.0, 10.0, 11.0])
        acc = Account.with_cash(1_000_000)
        step(acc, [Order("SH600001", Side.BUY, shares=1000)], 0, store)
        nav1 = mark(acc, 1, store)
        nav2 = mark(acc, 2, store)
        assert nav2 - nav1 == Decimal("1000.00")

    def test_stale_close_flagged(self):
        base = dt.date(2024, 1, 1)
        bars = [flat_bar("SH600001", base + dt.timedelta(days=i), 10.0) for i in range(2)]
        bars += [flat_bar("SH600002", base + dt.timedelta(days=i), 5.0) for i in range(4)]
        store = MarketStore(bars)
        acc = Account.with_cash(1_000_000)
        step(acc, [Order("SH600001", Side.BUY, shares=100)], 0, store)
        mark(acc, 3, store)
        assert acc.positions["SH600001"].stale_mark


class TestCashConservation:
    def test_fuzzed_thousand_steps(self, mid_store):
        """cash' = cash - buys - costs + sells, exactly, over 1,000 fuzzed steps."""
        rng = random.Random(123)
        acc = Account.with_cash(1_000_000)
        tickers = list(mid_store.tickers)
        day_lo, day_hi = 2, len(mid_store.calendar) - 2
        day = day_lo
        for _ in range(1000):
            unlock_t1(acc)
            orders = []
            for _ in range(rng.randint(0, 4)):
                t = rng.choice(tickers)
                side = Side.BUY if rng.random() < 0.6 else Side.SELL
                if rng.random() < 0.5:
                    orders.append(Order(t, side, shares=rng.randrange(100, 2000, 100)))
                else:
                    orders.append(Order(t, side, target_weight=round(rng.random() * 0.2, 3)))
            before = acc.cash
            fills, _ = step(acc, orders, day, mid_store)
            flow = Decimal("0")
            for f in fills:
                if f.side is Side.BUY:
                    flow -= f.notional + f.cost
                else:
                    flow += f.notional - f.cost
            assert acc.cash - before == flow
            assert acc.cash >= 0
            assert all(p.shares_total >= 0 for p in acc.positions.values())
            day = day + 1 if day < day_hi else day_lo


class TestScorePortfolio:
    def test_no_orders_when_book_matches_target(self):
        store = make_flat_store(("SH600001", "SH600002", "SH600003", "SH600004"), n_days=10)
        acc = Account.with_cash(1_000_000)
        scores = {t: 1.0 for t in store.tickers}
        orders = score_portfolio_step(scores, acc, 1, store, k=2)
        acc2 = Account.with_cash(1_000_000)
        step(acc2, orders, 1, store)
        unlock_t1(acc2)
        again = score_portfolio_step(scores, acc2, 2, store, k=2)
        assert again == []

    def test_empty_account_buys_equal_weights(self):
        store = make_flat_store(tuple(f"SH6000{i:02d}" for i in range(1, 26)), n_days=10)
        acc = Account.with_cash(1_000_000)
        scores = {t: float(i) for i, t in enumerate(store.tickers)}
        orders = score_portfolio_step(scores, acc, 1, store, k=20)
        assert len(orders) == 20
        # equal weights over the investable budget (NAV minus the 1% buffer)
        assert all(o.side is Side.BUY and o.target_weight == pytest.approx(0.99 / 20) for o in orders)
        assert len({o.target_weight for o in orders}) == 1

    def test_single_swap_sell_then_buy(self):
        store = make_flat_store(("SH600001", "SH600002", "SH600003"), n_days=10)
        acc = Account.with_cash(1_000_000)
        step(acc, [Order("SH600001", Side.BUY, target_weight=0.5),
                   Order("SH600002", Side.BUY, target_weight=0.5)], 1, store)
        unlock_t1(acc)
        scores = {"SH600001": 3.0, "SH600003": 2.0, "SH600002": 1.0}
        orders = score_portfolio_step(scores, acc, 2, store, k=2)
        assert [o.side for o in orders] == [Side.SELL, Side.BUY]
        assert orders[0].ticker == "SH600002" and orders[1].ticker == "SH600003"

    def test_k_exceeds_universe(self, flat_store):
        acc = Account.with_cash(1_000_000)
        with pytest.raises(ValueError):
            score_portfolio_step({t: 1.0 for t in flat_store.tickers}, acc, 1, flat_store, k=5)
