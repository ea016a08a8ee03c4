import copy
import json
import pickle

import pytest

from masktrade.execution import Account, Order, Side, step, unlock_t1
from masktrade.harness.config import merge_config
from masktrade.masking import AliasMap, MaskLevel, leak_scan, mask
from masktrade.tools import (
    INVALID_ARGUMENT,
    TOOL_NAMES,
    UNKNOWN_TOOL,
    ToolContext,
    dispatch,
)


@pytest.fixture()
def ctx(small_store):
    amap = AliasMap(small_store.tickers, MaskLevel.BLINDED, seed=3, anchor_index=300,
                    calendar=small_store.calendar)
    account = Account.with_cash(1_000_000)
    return ToolContext(small_store, account, 305, amap, merge_config(None))


def alias_of(ctx, ticker):
    return ctx.amap.ticker_to_alias[ticker]


def masked(ctx, name, args):
    r = dispatch(name, args, ctx)
    assert r.ok, r.error
    return mask(r.payload, ctx.amap)


class TestMarketContext:
    def test_stamps_and_fields(self, ctx):
        m = masked(ctx, "get_market_context", {})
        assert m["as_of_date"] == "day_+5"
        assert m["data_cutoff"] == "day_+4"
        assert m["contains_current_day_market_data"] is False
        assert m["universe_size"] == len(ctx.store.tickers)
        assert m["sector_tone"] in ("risk-on", "neutral", "risk-off")

    def test_bright_renders_real_dates(self, small_store):
        amap = AliasMap(small_store.tickers, MaskLevel.BRIGHT, seed=1, anchor_index=300,
                        calendar=small_store.calendar)
        c = ToolContext(small_store, Account.with_cash(1), 305, amap, merge_config(None))
        m = masked(c, "get_market_context", {})
        assert m["as_of_date"] == small_store.calendar.date(305).isoformat()


class TestScreen:
    def test_ranked_descending(self, ctx):
        m = masked(ctx, "screen_candidates", {"sort_by": "ret_20d", "top_k": 5})
        rows = m["candidates"]
        assert len(rows) == 5
        assert [r["rank"] for r in rows] == [1, 2, 3, 4, 5]
        vals = [r["ret_20d"] for r in rows]
        assert vals == sorted(vals, reverse=True)

    def test_top_1_of_two(self, small_store, ctx):
        m = masked(ctx, "screen_candidates", {"sort_by": "ret_5d", "top_k": 1})
        # brute force: best ret_5d over the whole universe
        best = max((r for r in ctx.store.features(305) if r.ret_5d is not None),
                   key=lambda r: (r.ret_5d, r.ticker))
        assert m["candidates"][0]["ret_5d"] == best.ret_5d

    def test_unknown_feature_rejected(self, ctx):
        r = dispatch("screen_candidates", {"sort_by": "pe_ratio", "top_k": 5}, ctx)
        assert not r.ok and r.error_code == INVALID_ARGUMENT

    def test_top_k_bounds(self, ctx):
        r = dispatch("screen_candidates", {"sort_by": "ret_1d", "top_k": 101}, ctx)
        assert not r.ok and r.error_code == INVALID_ARGUMENT


class TestSnapshot:
    def test_lookback_window(self, ctx):
        sid = alias_of(ctx, ctx.store.tickers[0])
        m = masked(ctx, "get_stock_snapshot", {"stock_id": sid, "lookback": 5})
        assert len(m["bars"]) == 5
        assert m["bars"][-1]["date"] == "day_+4"  # newest bar is the cutoff

    def test_limit_fields_arithmetic(self, ctx):
        t = ctx.store.tickers[0]
        sid = alias_of(ctx, t)
        m = masked(ctx, "get_stock_snapshot", {"stock_id": sid, "lookback": 3})
        prev_close = ctx.store.close_at_or_before(t, 304)[0]
        pct = ctx.store.boards[t].limit_pct
        assert m["limit_up"] == pytest.approx(prev_close * (1 + pct))
        assert m["limit_down"] == pytest.approx(prev_close * (1 - pct))
        assert m["board"] == ctx.store.boards[t].board.value

    def test_unknown_alias(self, ctx):
        r = dispatch("get_stock_snapshot", {"stock_id": "asset_9999", "lookback": 5}, ctx)
        assert not r.ok and r.error_code == INVALID_ARGUMENT

    def test_lookback_cap(self, ctx):
        sid = alias_of(ctx, ctx.store.tickers[0])
        r = dispatch("get_stock_snapshot", {"stock_id": sid, "lookback": 61}, ctx)
        assert not r.ok


class TestCompare:
    def test_two_ids_one_dim(self, ctx):
        ids = [alias_of(ctx, t) for t in ctx.store.tickers[:2]]
        m = masked(ctx, "compare_candidates", {"stock_ids": ids, "dims": ["ret_5d"]})
        assert set(m["ranks"]["ret_5d"]) == {1, 2}

    def test_duplicates_noted(self, ctx):
        a = alias_of(ctx, ctx.store.tickers[0])
        b = alias_of(ctx, ctx.store.tickers[1])
        m = masked(ctx, "compare_candidates", {"stock_ids": [a, b, a], "dims": ["ret_1d"]})
        assert m["duplicates_removed"] == [a]
        assert len(m["stock_ids"]) == 2

    def test_eleven_ids_rejected(self, ctx):
        ids = [alias_of(ctx, t) for t in ctx.store.tickers[:11]]
        r = dispatch("compare_candidates", {"stock_ids": ids, "dims": ["ret_1d"]}, ctx)
        assert not r.ok

    def test_unknown_id_named(self, ctx):
        ids = [alias_of(ctx, ctx.store.tickers[0]), "asset_9999"]
        r = dispatch("compare_candidates", {"stock_ids": ids, "dims": ["ret_1d"]}, ctx)
        assert not r.ok and "asset_9999" in r.error


class TestPortfolioState:
    def test_empty_account(self, ctx):
        m = masked(ctx, "portfolio_state", {})
        assert m["positions"] == [] and m["cash_weight"] == 1.0

    def test_yesterday_buy_fully_available(self, small_store):
        amap = AliasMap(small_store.tickers, MaskLevel.BLINDED, seed=3, anchor_index=300,
                        calendar=small_store.calendar)
        acc = Account.with_cash(1_000_000)
        step(acc, [Order(small_store.tickers[0], Side.BUY, shares=500)], 303, small_store)
        unlock_t1(acc)  # the next step unlocks yesterday's buys
        c = ToolContext(small_store, acc, 304, amap, merge_config(None))
        m = masked(c, "portfolio_state", {})
        p = m["positions"][0]
        assert p["shares_available"] == p["shares_total"] == 500


class TestRiskCheck:
    def test_two_tenth_buys_project(self, ctx):
        ids = [alias_of(ctx, t) for t in ctx.store.tickers[:2]]
        drafts = [{"stock_id": s, "side": "BUY", "target_weight": 0.10,
                   "confidence": 0.8, "reason": "screen leader allocation"} for s in ids]
        m = masked(ctx, "risk_check", {"draft_orders": drafts})
        assert m["valid"] is True
        for s in ids:
            assert m["projected_weights"][s] == pytest.approx(0.10, abs=0.01)

    def test_sell_unheld_violation(self, ctx):
        sid = alias_of(ctx, ctx.store.tickers[0])
        m = masked(ctx, "risk_check", {"draft_orders": [
            {"stock_id": sid, "side": "SELL", "shares": 100,
             "confidence": 0.5, "reason": "exit stale position"}]})
        assert m["valid"] is False
        assert m["violations"][0]["code"] == "INSUFFICIENT_SHARES"

    def test_schema_error_names_field(self, ctx):
        sid = alias_of(ctx, ctx.store.tickers[0])
        r = dispatch("risk_check", {"draft_orders": [
            {"stock_id": sid, "side": "BUY", "target_weight": 0.1, "shares": 100,
             "confidence": 0.5, "reason": "both sizing fields set"}]}, ctx)
        assert not r.ok and "orders[0]" in r.error

    def test_does_not_commit(self, ctx):
        sid = alias_of(ctx, ctx.store.tickers[0])
        dispatch("risk_check", {"draft_orders": [
            {"stock_id": sid, "side": "BUY", "target_weight": 0.2,
             "confidence": 0.5, "reason": "projection only"}]}, ctx)
        assert ctx.account.positions == {}

    def test_matches_step_when_next_open_equals_prev_close(self, flat_store):
        """On a flat store the dry-run projection equals real execution."""
        amap = AliasMap(flat_store.tickers, MaskLevel.BLINDED, seed=1, anchor_index=2,
                        calendar=flat_store.calendar)
        acc = Account.with_cash(1_000_000)
        c = ToolContext(flat_store, acc, 5, amap, merge_config(None))
        sid = amap.ticker_to_alias["SH600001"]
        m = masked(c, "risk_check", {"draft_orders": [
            {"stock_id": sid, "side": "BUY", "target_weight": 0.25,
             "confidence": 0.5, "reason": "consistency fixture"}]})
        acc2 = Account.with_cash(1_000_000)
        step(acc2, [Order("SH600001", Side.BUY, target_weight=0.25)], 5, flat_store)
        real_value = float(acc2.positions["SH600001"].shares_total) * 10.0
        real_nav = float(acc2.cash) + real_value
        lot_tol = 100 * 10.0 / real_nav
        assert m["projected_weights"][sid] == pytest.approx(real_value / real_nav, abs=lot_tol)


class TestDispatchDiscipline:
    def test_unknown_tool(self, ctx):
        r = dispatch("get_news", {}, ctx)
        assert not r.ok and r.error_code == UNKNOWN_TOOL

    def test_read_only_state_hash(self, ctx):
        """No tool mutates the account or the store's bar data."""
        acc_before = pickle.dumps(ctx.account)
        args_by_tool = {
            "get_market_context": {},
            "screen_candidates": {"sort_by": "ret_20d", "top_k": 5},
            "get_stock_snapshot": {"stock_id": alias_of(ctx, ctx.store.tickers[0]), "lookback": 10},
            "compare_candidates": {"stock_ids": [alias_of(ctx, t) for t in ctx.store.tickers[:3]],
                                   "dims": ["ret_5d", "vol_20d"]},
            "portfolio_state": {},
            "risk_check": {"draft_orders": [{"stock_id": alias_of(ctx, ctx.store.tickers[0]),
                                             "side": "BUY", "target_weight": 0.1,
                                             "confidence": 0.6, "reason": "state-hash probe"}]},
        }
        for name in TOOL_NAMES:
            dispatch(name, copy.deepcopy(args_by_tool[name]), ctx)
            assert pickle.dumps(ctx.account) == acc_before

    def test_time_safety_cutoff(self, ctx, small_store):
        """Every numeric in a tool payload is reproducible from bars <= cutoff."""
        from masktrade.data.market import MarketStore

        cut_bars = []
        for t in small_store.tickers:
            s = small_store.series(t)
            for d in s.day_idx:
                if d <= 304:  # decision day 305, cutoff 304
                    cut_bars.append(small_store.bar(t, int(d)))
        cut_store = MarketStore(cut_bars, market_id=small_store.market_id)
        cut_ctx = ToolContext(cut_store, ctx.account, 305, ctx.amap, ctx.config)
        for name, args in (
            ("get_market_context", {}),
            ("screen_candidates", {"sort_by": "ret_20d", "top_k": 8}),
            ("get_stock_snapshot", {"stock_id": alias_of(ctx, ctx.store.tickers[1]), "lookback": 20}),
        ):
            full = dispatch(name, dict(args), ctx)
            cut = dispatch(name, dict(args), cut_ctx)
            assert json.dumps(mask(full.payload, ctx.amap), sort_keys=True) == \
                   json.dumps(mask(cut.payload, ctx.amap), sort_keys=True)

    def test_mask_totality_fuzz(self, ctx):
        import random

        rng = random.Random(9)
        tickers = list(ctx.store.tickers)
        for _ in range(300):
            name = rng.choice(TOOL_NAMES)
            if name == "screen_candidates":
                args = {"sort_by": rng.choice(["ret_1d", "ret_5d", "ret_20d", "vol_20d"]),
                        "top_k": rng.randint(1, 12)}
            elif name == "get_stock_snapshot":
                args = {"stock_id": alias_of(ctx, rng.choice(tickers)), "lookback": rng.randint(1, 60)}
            elif name == "compare_candidates":
                ids = rng.sample(tickers, rng.randint(2, 6))
                args = {"stock_ids": [alias_of(ctx, t) for t in ids], "dims": ["ret_5d"]}
            elif name == "risk_check":
                args = {"draft_orders": [{"stock_id": alias_of(ctx, rng.choice(tickers)),
                                          "side": rng.choice(["BUY", "SELL"]),
                                          "target_weight": round(rng.random(), 3),
                                          "confidence": round(rng.random(), 3),
                                          "reason": "fuzzed draft order payload"}]}
            else:
                args = {}
            r = dispatch(name, args, ctx)
            if r.ok:
                assert leak_scan(mask(r.payload, ctx.amap), ctx.amap) == []
