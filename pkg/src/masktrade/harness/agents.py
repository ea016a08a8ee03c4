"""Built-in scripted agents.

These are deterministic LLM stand-ins. Each one drives a StepView: optional
tool calls, then one or more submissions. The momentum strategy is specified
precisely enough (see docs/WIRE_PROTOCOL.md) that an out-of-process
implementation must reproduce its trade log byte for byte.
"""
from __future__ import annotations

import csv
import json
import random

from .. import execution

SCRIPTED_AGENT_KINDS = ("cash", "random", "momentum_topk", "score_file")


def _dump(action: dict) -> str:
    return json.dumps(action, ensure_ascii=False)


class CashAgent:
    """Always abstains."""

    name = "cash"
    privileged = False

    def run_step(self, view) -> None:
        view.submit(_dump({
            "orders": [],
            "overall_reason": "no identifiable edge today; hold cash and wait",
        }))


class RandomAgent:
    """Seeded uniform BUYs at weight 1/k, a noise baseline."""

    privileged = False

    def __init__(self, k: int = 5, seed: int = 0):
        self.k = k
        self.seed = seed
        self.name = f"random-k{k}"

    def run_step(self, view) -> None:
        universe = list(view.data["universe"])
        rng = random.Random(f"{self.seed}:{view.step_index}")
        k = min(self.k, len(universe))
        picks = sorted(rng.sample(universe, k))
        orders = [{
            "stock_id": sid,
            "side": "BUY",
            "target_weight": 1.0 / k,
            "confidence": 0.5,
            "reason": "seeded random allocation for the noise baseline",
        } for sid in picks]
        view.submit(_dump({
            "orders": orders,
            "overall_reason": "uniform random book; exists only to calibrate the metric panel",
        }))


class MomentumTopKAgent:
    """Hold the top-k 20-day-momentum names with below-median volatility.

    Tool-driven (open-research only): screen a pool of 2k candidates by
    ret_20d, keep those with vol_20d strictly below the pool median, target
    the first k equal-weighted. Holdings that drop out are sold to zero.
    Abstains outside open-research.
    """

    privileged = False

    def __init__(self, k: int = 5):
        self.k = k
        self.name = f"momentum-top{k}"

    def run_step(self, view) -> None:
        if view.mode != "open_research":
            view.submit(_dump({
                "orders": [],
                "overall_reason": "momentum strategy needs the research tools; holding",
            }))
            return
        pool_k = max(2 * self.k, 10)
        screen = view.call_tool("screen_candidates", {"sort_by": "ret_20d", "top_k": pool_k})
        state = view.call_tool("portfolio_state", {})
        if not screen.get("ok") or not state.get("ok"):
            view.submit(_dump({
                "orders": [],
                "overall_reason": "research tools unavailable this step; holding",
            }))
            return
        rows = screen["payload"]["candidates"]
        vols = sorted(r["vol_20d"] for r in rows if r["vol_20d"] is not None)
        if not vols:
            median = None
        elif len(vols) % 2 == 1:
            median = vols[len(vols) // 2]
        else:
            median = (vols[len(vols) // 2 - 1] + vols[len(vols) // 2]) / 2.0
        quiet = [r for r in rows if r["vol_20d"] is not None and median is not None and r["vol_20d"] < median]
        targets = quiet[: self.k]
        target_ids = [r["stock_id"] for r in targets]
        held = [p["stock_id"] for p in state["payload"]["positions"]]

        orders = []
        for sid in held:
            if sid not in target_ids:
                orders.append({
                    "stock_id": sid,
                    "side": "SELL",
                    "target_weight": 0.0,
                    "confidence": 0.5,
                    "reason": f"dropped out of the momentum top-{self.k}; exit position",
                })
        w = 1.0 / self.k
        for r in targets:
            if r["stock_id"] in held:
                continue
            orders.append({
                "stock_id": r["stock_id"],
                "side": "BUY",
                "target_weight": w,
                "confidence": 0.6,
                "reason": f"momentum rank {r['rank']} with below-median volatility",
            })
        view.submit(_dump({
            "orders": orders,
            "overall_reason": f"hold top-{self.k} momentum names with below-median volatility",
        }))


class ScoreFileAgent:
    """Portfolio constructor over an external score file.

    Privileged: runs below the mask (it models a trained factor baseline,
    not an LLM), reads real dates and tickers, and delegates sizing to
    execution.score_portfolio_step. Days missing from the file abstain.
    """

    privileged = True

    def __init__(self, path, k: int = 20, threshold: float = 0.06):
        self.k = k
        self.threshold = threshold
        self.name = f"score-top{k}"
        self.scores: dict[str, dict[str, float]] = {}
        with open(path, "r", encoding="utf-8", newline="") as fh:
            reader = csv.DictReader(fh)
            if reader.fieldnames is None or [c.strip() for c in reader.fieldnames] != ["date", "ticker", "score"]:
                raise ValueError("score file must have header date,ticker,score")
            for row in reader:
                self.scores.setdefault(row["date"].strip(), {})[row["ticker"].strip()] = float(row["score"])

    def run_step(self, view) -> None:
        ctx = view.privileged_ctx
        store = ctx["store"]
        day = ctx["day"]
        date = store.calendar.date(day).isoformat()
        day_scores = self.scores.get(date)
        if not day_scores:
            view.submit(_dump({
                "orders": [],
                "overall_reason": f"no scores for step {view.step_index}; abstaining today",
            }))
            return
        orders = execution.score_portfolio_step(
            day_scores, ctx["account"], day, store, self.k, self.threshold, ctx["params"],
        )
        view.submit(_dump({
            "orders": [{
                "stock_id": o.ticker,
                "side": o.side.value,
                "target_weight": o.target_weight,
                "confidence": o.confidence,
                "reason": o.reason,
            } for o in orders],
            "overall_reason": f"equal-weight top-{self.k} by external score with cost-aware threshold",
        }))


def build_agent(kind: str, params: dict | None = None):
    params = params or {}
    if kind == "cash":
        return CashAgent()
    if kind == "random":
        return RandomAgent(k=int(params.get("k", 5)), seed=int(params.get("seed", 0)))
    if kind == "momentum_topk":
        return MomentumTopKAgent(k=int(params.get("k", 5)))
    if kind == "score_file":
        if "path" not in params:
            raise ValueError("score_file agent needs params.path pointing at a scores CSV")
        return ScoreFileAgent(params["path"], k=int(params.get("k", 20)),
                              threshold=float(params.get("threshold", 0.06)))
    raise ValueError(f"unknown scripted agent kind {kind!r}; choose from {SCRIPTED_AGENT_KINDS}")
