import json

import pytest

from masktrade.harness import build_agent, run_episode, write_episode
from masktrade.harness.agents import CashAgent
from masktrade.harness.config import merge_config
from masktrade.masking import leak_scan

WINDOW = (300, 308)


class MalformedAgent:
    """Submits unparseable text on every attempt."""

    name = "malformed"
    privileged = False

    def run_step(self, view):
        for _ in range(10):
            fb = view.submit("I would like to buy the dip please")
            if fb is None or "fallback" in fb.get("codes", []):
                return


class SilentAgent:
    name = "silent"
    privileged = False

    def run_step(self, view):
        return


class EchoingFixAgent:
    """First submission invalid, second repairs it using the feedback."""

    name = "echo-fix"
    privileged = False

    def __init__(self):
        self.feedback_seen = []

    def run_step(self, view):
        bad = json.dumps({"orders": [{"stock_id": "asset_0000", "side": "BUY",
                                      "target_weight": 0.1, "shares": 100,
                                      "confidence": 0.5, "reason": "both sizing fields"}],
                          "overall_reason": "first attempt is deliberately invalid"})
        fb = view.submit(bad)
        assert fb is not None
        self.feedback_seen.append(fb)
        view.submit(json.dumps({"orders": [], "overall_reason": "repaired to an abstention after feedback"}))


def run(store, agent, mode="memory_only", level="blinded", window=WINDOW, seed=7, config=None):
    return run_episode(store, mode, level, window, agent, seed=seed, config=config)


class TestCashEpisode:
    def test_flat_nav_and_full_abstention(self, small_store):
        res = run(small_store, CashAgent())
        navs = res.nav_values
        assert navs[-1] / navs[0] - 1.0 == 0.0
        assert all(r.action is not None and r.action["orders"] == [] for r in res.records)
        assert not any(r.parse_failure for r in res.records)

    def test_window_bounds_checked(self, small_store):
        n = len(small_store.calendar)
        with pytest.raises(ValueError):
            run(small_store, CashAgent(), window=(n - 5, n - 1))


class TestFailureModes:
    def test_malformed_every_step(self, small_store):
        res = run(small_store, MalformedAgent())
        assert all(r.parse_failure and r.fallback for r in res.records)
        navs = res.nav_values
        assert navs[-1] == navs[0]

    def test_retry_bound(self, small_store):
        res = run(small_store, MalformedAgent())
        budget = 1 + merge_config(None)["schema_retries"]
        assert all(len(r.submissions) == budget for r in res.records)

    def test_silent_agent_falls_back(self, small_store):
        res = run(small_store, SilentAgent())
        assert all(r.fallback for r in res.records)

    def test_feedback_quotes_violations(self, small_store):
        agent = EchoingFixAgent()
        res = run(small_store, agent)
        fb = agent.feedback_seen[0]
        assert "weight_shares_exclusive" in fb["codes"]
        assert "mutually exclusive" in fb["detail"]
        assert all(not r.fallback for r in res.records)
        assert all(len(r.submissions) == 2 for r in res.records)


class TestModeGating:
    def test_memory_only_empty_feature_table_and_tools_rejected(self, small_store):
        class PeekAgent(CashAgent):
            name = "peek"
            saw = {}

            def run_step(self, view):
                PeekAgent.saw["features"] = view.data["features_table"]
                PeekAgent.saw["tool"] = view.call_tool("screen_candidates",
                                                       {"sort_by": "ret_20d", "top_k": 5})
                super().run_step(view)

        res = run(small_store, PeekAgent(), mode="memory_only")
        assert PeekAgent.saw["features"] == []
        assert PeekAgent.saw["tool"]["ok"] is False
        assert "disabled" in PeekAgent.saw["tool"]["error"]
        assert all(r.tool_calls[0]["ok"] is False for r in res.records)

    def test_fixed_candidate_has_pool_and_rejects_tools(self, small_store):
        class PoolAgent(CashAgent):
            name = "pool"
            saw = {}

            def run_step(self, view):
                PoolAgent.saw["features"] = view.data["features_table"]
                PoolAgent.saw["tool"] = view.call_tool("screen_candidates",
                                                       {"sort_by": "ret_20d", "top_k": 5})
                super().run_step(view)

        run(small_store, PoolAgent(), mode="fixed_candidate")
        assert len(PoolAgent.saw["features"]) > 0
        assert all(set(row) >= {"stock_id", "ret_20d", "vol_20d"} for row in PoolAgent.saw["features"])
        assert PoolAgent.saw["tool"]["ok"] is False

    def test_fixed_candidate_buy_gate(self, small_store):
        class OutOfPoolAgent(CashAgent):
            name = "oop"

            def run_step(self, view):
                pool = {r["stock_id"] for r in view.data["features_table"]}
                outside = sorted(set(view.data["universe"]) - pool)
                if not outside:
                    super().run_step(view)
                    return
                fb = view.submit(json.dumps({
                    "orders": [{"stock_id": outside[0], "side": "BUY", "target_weight": 0.1,
                                "confidence": 0.5, "reason": "outside the candidate pool"}],
                    "overall_reason": "probe the fixed candidate pool gate",
                }))
                if fb is not None:
                    view.submit(json.dumps({"orders": [],
                                            "overall_reason": "fall back to abstention after gate"}))

        res = run(small_store, OutOfPoolAgent(), mode="fixed_candidate")
        gated = [s for r in res.records for s in r.submissions
                 if any(v["code"] == "buy_outside_pool" for v in s["violations"])]
        assert gated

    def test_open_research_tools_allowed(self, small_store):
        res = run(small_store, build_agent("momentum_topk", {"k": 3}),
                  mode="open_research")
        assert any(c["ok"] for r in res.records for c in r.tool_calls)


class TestDeterminism:
    def test_byte_identical_step_records(self, small_store):
        a = run(small_store, build_agent("momentum_topk", {"k": 3}), mode="open_research")
        b = run(small_store, build_agent("momentum_topk", {"k": 3}), mode="open_research")
        ja = [json.dumps(r.to_json(), sort_keys=True) for r in a.records]
        jb = [json.dumps(r.to_json(), sort_keys=True) for r in b.records]
        assert ja == jb

    def test_seed_changes_aliases(self, small_store):
        a = run(small_store, CashAgent(), seed=1)
        b = run(small_store, CashAgent(), seed=2)
        assert a.amap.ticker_to_alias != b.amap.ticker_to_alias


class TestEpisodeInvariants:
    @pytest.mark.parametrize("level", ["bright", "stock_blind", "date_blind", "blinded"])
    def test_leak_discipline_every_level(self, small_store, level):
        res = run(small_store, build_agent("momentum_topk", {"k": 3}),
                  mode="open_research", level=level)
        for rec in res.records:
            assert leak_scan(rec.agent_visible_text(), res.amap) == []

    def test_step_zero_date_labels(self, small_store):
        res = run(small_store, build_agent("momentum_topk", {"k": 3}), mode="open_research")
        first = res.records[0]
        assert first.date_label == "day_+0"
        assert "## Backtest step: day_+0" in first.user_message
        assert "data cutoff day_-1" in first.user_message
        ctx_calls = [c for c in first.tool_calls if c["name"] == "screen_candidates" and c["ok"]]
        payload = ctx_calls[0]["result"]["payload"]
        assert payload["as_of_date"] == "day_+0"
        assert payload["data_cutoff"] == "day_-1"

    def test_prev_execution_verbatim(self, small_store):
        res = run(small_store, build_agent("momentum_topk", {"k": 3}), mode="open_research")
        for prev, cur in zip(res.records, res.records[1:]):
            masked_fills = [
                {"stock_id": res.amap.ticker_to_alias[f["ticker"]],
                 "side": f["side"], "shares": f["shares"], "price": f["price"],
                 "cost": f["cost"], "note": f["note"]}
                for f in prev.fills
            ]
            for f in masked_fills:
                line = (f"FILL {f['side']} {f['stock_id']} shares={f['shares']} "
                        f"price={f['price']:.4f} cost={f['cost']}")
                assert line in cur.user_message

    def test_phase_discipline_no_tools_after_submit(self, small_store):
        class ToolAfterSubmit(CashAgent):
            name = "late-tool"
            saw = {}

            def run_step(self, view):
                super().run_step(view)
                try:
                    ToolAfterSubmit.saw["result"] = view.call_tool("portfolio_state", {})
                except Exception as e:  # noqa: BLE001
                    ToolAfterSubmit.saw["raised"] = type(e).__name__

        run(small_store, ToolAfterSubmit(), mode="open_research")
        assert ToolAfterSubmit.saw.get("raised") == "StepClosed"

    def test_nav_starts_at_initial_cash(self, small_store):
        res = run(small_store, build_agent("momentum_topk", {"k": 3}), mode="open_research")
        assert res.nav_values[0] == 1_000_000.0
        assert res.benchmark_values[0] == 1_000_000.0

    def test_write_episode_deterministic(self, small_store, tmp_path):
        res = run(small_store, build_agent("momentum_topk", {"k": 3}), mode="open_research")
        write_episode(res, tmp_path / "a")
        write_episode(res, tmp_path / "b")
        for name in ("config.json", "alias_map.json", "steps.jsonl", "trades.jsonl", "nav.csv"):
            assert (tmp_path / "a" / name).read_bytes() == (tmp_path / "b" / name).read_bytes()


class TestScoreFileAgent:
    def test_constant_scores_buy_once_never_rebalance(self, tmp_path):
        from conftest import make_flat_store

        tickers = tuple(f"SH6000{i:02d}" for i in range(1, 26))
        store = make_flat_store(tickers, n_days=40)
        rows = ["date,ticker,score"]
        for d in range(40):
            date = store.calendar.date(d).isoformat()
            rows.extend(f"{date},{t},1.0" for t in tickers)
        score_path = tmp_path / "scores.csv"
        score_path.write_text("\n".join(rows) + "\n", encoding="utf-8")

        agent = build_agent("score_file", {"path": str(score_path), "k": 20, "threshold": 0.06})
        res = run_episode(store, "memory_only", "bright", (5, 20), agent, seed=1)
        n_orders = [len(r.orders_real) for r in res.records]
        assert n_orders[0] == 20
        assert all(n == 0 for n in n_orders[1:])

    def test_missing_day_abstains(self, tmp_path):
        from conftest import make_flat_store

        store = make_flat_store(n_days=30)
        date0 = store.calendar.date(5).isoformat()
        score_path = tmp_path / "scores.csv"
        score_path.write_text(f"date,ticker,score\n{date0},SH600001,1.0\n", encoding="utf-8")
        agent = build_agent("score_file", {"path": str(score_path), "k": 1})
        res = run_episode(store, "memory_only", "bright", (5, 8), agent, seed=1)
        assert len(res.records[0].orders_real) == 1
        assert all(r.action["orders"] == [] for r in res.records[1:])
