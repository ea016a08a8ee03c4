"""The six read-only research tools.

Each tool is a pure function of (store, account, decision day). Dispatch
unmasks identifier arguments on entry, builds a tagged payload, and the
caller masks it on exit, so a blinded agent never sees a real ticker or
date even transiently. Every payload carries ``as_of_date`` and
``data_cutoff``; all numbers are reproducible from bars dated at or before
the cutoff (the day before the decision day).
"""
from __future__ import annotations

import copy
from dataclasses import dataclass

from . import execution
from .actions import ValidationContext, Violation, _check_order
from .data.features import FEATURE_FIELDS
from .data.market import MarketStore
from .masking import AliasMap, DateRef, MaskingError, TickerRef, UnknownAliasError

TOOL_NAMES = (
    "get_market_context",
    "screen_candidates",
    "get_stock_snapshot",
    "compare_candidates",
    "portfolio_state",
    "risk_check",
)

INVALID_ARGUMENT = "invalid_argument"
UNKNOWN_TOOL = "unknown_tool"
BUDGET_EXHAUSTED = "budget_exhausted"
TOOL_NOT_ALLOWED = "tool_not_allowed"


class ToolArgumentError(ValueError):
    def __init__(self, message: str):
        super().__init__(message)
        self.code = INVALID_ARGUMENT


@dataclass
class ToolContext:
    store: MarketStore
    account: execution.Account
    day: int
    amap: AliasMap
    config: dict

    @property
    def cutoff(self) -> int:
        return self.day - 1


@dataclass
class ToolResult:
    ok: bool
    payload: dict | None = None       # masked, agent-visible
    error: str | None = None
    error_code: str | None = None

    def wire(self) -> dict:
        if self.ok:
            return {"ok": True, "payload": self.payload}
        return {"ok": False, "error": self.error, "error_code": self.error_code}


def _stamp(ctx: ToolContext, payload: dict) -> dict:
    out = {"as_of_date": DateRef(ctx.day), "data_cutoff": DateRef(ctx.cutoff)}
    out.update(payload)
    return out


def _require(args: dict, allowed: set[str]) -> None:
    extra = set(args) - allowed
    if extra:
        raise ToolArgumentError(f"unexpected arguments: {sorted(extra)}")


def tool_get_market_context(ctx: ToolContext, args: dict) -> dict:
    _require(args, set())
    c = ctx.cutoff
    ret_5d = ctx.store.index_return(c, 5)
    if ret_5d > 0.01:
        tone = "risk-on"
    elif ret_5d < -0.01:
        tone = "risk-off"
    else:
        tone = "neutral"
    return _stamp(ctx, {
        "contains_current_day_market_data": False,
        "market": ctx.store.market_id,
        "universe_size": ctx.store.universe(ctx.day).size,
        "index_ret_1d": ctx.store.index_return(c, 1),
        "index_ret_5d": ret_5d,
        "index_ret_20d": ctx.store.index_return(c, 20),
        "sector_tone": tone,
    })


def _feature_payload(row, rank: int | None = None) -> dict:
    d = {
        "stock_id": TickerRef(row.ticker),
        "prev_close": row.prev_close,
        "ret_1d": row.ret_1d,
        "ret_5d": row.ret_5d,
        "ret_20d": row.ret_20d,
        "vol_20d": row.vol_20d,
        "drawdown_20d": row.drawdown_20d,
    }
    if row.partial:
        d["partial_history"] = True
    if rank is not None:
        d["rank"] = rank
    return d


def tool_screen_candidates(ctx: ToolContext, args: dict) -> dict:
    _require(args, {"sort_by", "top_k"})
    sort_by = args.get("sort_by")
    if sort_by not in FEATURE_FIELDS:
        raise ToolArgumentError(
            f"sort_by must be one of {list(FEATURE_FIELDS)}; got {sort_by!r}")
    top_k = args.get("top_k")
    cap = ctx.config["max_candidates_per_step"]
    if not isinstance(top_k, int) or isinstance(top_k, bool) or not 1 <= top_k <= cap:
        raise ToolArgumentError(f"top_k must be an integer in [1, {cap}]")
    members = ctx.store.universe(ctx.day).members
    rows = [r for r in ctx.store.features(ctx.day, members) if r.value(sort_by) is not None]
    rows.sort(key=lambda r: (-r.value(sort_by), r.ticker))
    out = [_feature_payload(r, rank=i + 1) for i, r in enumerate(rows[:top_k])]
    return _stamp(ctx, {"sort_by": sort_by, "candidates": out})


def tool_get_stock_snapshot(ctx: ToolContext, args: dict) -> dict:
    _require(args, {"stock_id", "lookback"})
    sid = args.get("stock_id")
    if not isinstance(sid, str):
        raise ToolArgumentError("stock_id must be a string")
    ticker = ctx.amap.resolve_ticker(sid)
    lookback = args.get("lookback", 20)
    if not isinstance(lookback, int) or isinstance(lookback, bool) or not 1 <= lookback <= 60:
        raise ToolArgumentError("lookback must be an integer in [1, 60]")

    s = ctx.store.series(ticker)
    n = s.pos_before(ctx.day)
    bars = []
    for p in range(max(0, n - lookback), n):
        bars.append({
            "date": DateRef(int(s.day_idx[p])),
            "open": float(s.open[p]),
            "high": float(s.high[p]),
            "low": float(s.low[p]),
            "close": float(s.close[p]),
            "volume": float(s.volume[p]),
            "amount": float(s.amount[p]),
        })
    row = ctx.store.features(ctx.day, [ticker])[0]
    bc = ctx.store.boards[ticker]
    prev = ctx.store.close_at_or_before(ticker, ctx.cutoff)
    prev_close = prev[0] if prev else None
    limit_up = prev_close * (1.0 + bc.limit_pct) if prev_close else None
    limit_down = prev_close * (1.0 - bc.limit_pct) if prev_close else None
    warn_up, warn_down = _limit_warnings(ctx.store, ticker, ctx.cutoff)
    return _stamp(ctx, {
        "stock_id": TickerRef(ticker),
        "bars": bars,
        "features": _feature_payload(row),
        "board": bc.board.value,
        "limit_pct": bc.limit_pct,
        "limit_up": limit_up,
        "limit_down": limit_down,
        "limit_up_risk": warn_up,
        "limit_down_risk": warn_down,
    })


def _limit_warnings(store: MarketStore, ticker: str, cutoff: int) -> tuple[bool, bool]:
    """Did the cutoff-day move reach the board limit band (advisory)."""
    s = store.series(ticker)
    p = s.pos_of(cutoff)
    if p is None or p == 0:
        return False, False
    pct = store.boards[ticker].limit_pct
    ratio = float(s.close[p] / s.close[p - 1])
    return ratio >= 1.0 + pct - 1e-9, ratio <= 1.0 - pct + 1e-9


def tool_compare_candidates(ctx: ToolContext, args: dict) -> dict:
    _require(args, {"stock_ids", "dims"})
    ids = args.get("stock_ids")
    if not isinstance(ids, list) or not all(isinstance(x, str) for x in ids):
        raise ToolArgumentError("stock_ids must be a list of strings")
    if not 2 <= len(ids) <= 10:
        raise ToolArgumentError("stock_ids must contain between 2 and 10 entries")
    dims = args.get("dims") or ["ret_5d", "ret_20d", "vol_20d"]
    if not isinstance(dims, list) or not set(dims) <= set(FEATURE_FIELDS):
        raise ToolArgumentError(f"dims must be a subset of {list(FEATURE_FIELDS)}")

    seen: list[str] = []
    duplicates: list[str] = []
    for x in ids:
        (duplicates if x in seen else seen).append(x)
    if len(seen) < 2:
        raise ToolArgumentError("need at least 2 distinct stock_ids after deduplication")
    tickers = [ctx.amap.resolve_ticker(x) for x in seen]

    rows = {r.ticker: r for r in ctx.store.features(ctx.day, tickers)}
    values: dict[str, list] = {}
    ranks: dict[str, list] = {}
    for dim in dims:
        vals = [rows[t].value(dim) for t in tickers]
        values[dim] = vals
        order = sorted(
            (i for i, v in enumerate(vals) if v is not None),
            key=lambda i: (-vals[i], tickers[i]),
        )
        rk: list = [None] * len(vals)
        for pos, i in enumerate(order, start=1):
            rk[i] = pos
        ranks[dim] = rk
    return _stamp(ctx, {
        "stock_ids": [TickerRef(t) for t in tickers],
        "dims": list(dims),
        "values": values,
        "ranks": ranks,
        "duplicates_removed": duplicates,
    })


def tool_portfolio_state(ctx: ToolContext, args: dict) -> dict:
    _require(args, set())
    acc = ctx.account
    nav = execution.mark_value(acc, ctx.cutoff, ctx.store)
    positions = []
    for t in sorted(acc.positions):
        pos = acc.positions[t]
        found = ctx.store.close_at_or_before(t, ctx.cutoff)
        last_close = found[0] if found else None
        value = (last_close or 0.0) * pos.shares_total
        weight = float(value / float(nav)) if nav > 0 else 0.0
        unreal = None
        if last_close is not None:
            unreal = round((last_close - float(pos.avg_cost)) * pos.shares_total, 2)
        positions.append({
            "stock_id": TickerRef(t),
            "shares_total": pos.shares_total,
            "shares_available": pos.shares_available,
            "avg_cost": float(pos.avg_cost),
            "last_close": last_close,
            "market_value": round(value, 2),
            "weight": weight,
            "unrealized_pnl": unreal,
            "stale_price": found is None or found[1] != ctx.cutoff,
        })
    cash = float(acc.cash)
    return _stamp(ctx, {
        "positions": positions,
        "num_positions": len(positions),
        "cash": cash,
        "cash_weight": cash / float(nav) if nav > 0 else 1.0,
        "nav": float(nav),
    })


def tool_risk_check(ctx: ToolContext, args: dict) -> dict:
    _require(args, {"draft_orders"})
    drafts = args.get("draft_orders")
    if not isinstance(drafts, list):
        raise ToolArgumentError("draft_orders must be a list of order objects")

    vctx = ValidationContext(
        mode="open_research",
        min_reason_length=ctx.config["min_reason_length"],
        max_single_weight=ctx.config["max_single_weight"],
        max_positions=ctx.config["max_positions"],
    )
    schema_violations: list[Violation] = []
    for i, o in enumerate(drafts):
        _check_order(o, i, vctx, schema_violations)
    if schema_violations:
        raise ToolArgumentError("; ".join(v.message for v in schema_violations))

    orders = []
    warnings = []
    for o in drafts:
        ticker = ctx.amap.resolve_ticker(o["stock_id"])
        side = execution.Side(o["side"])
        orders.append(execution.Order(
            ticker=ticker,
            side=side,
            target_weight=o.get("target_weight"),
            shares=o.get("shares"),
            confidence=float(o["confidence"]),
            reason=o["reason"],
        ))
        warn_up, warn_down = _limit_warnings(ctx.store, ticker, ctx.cutoff)
        if side is execution.Side.BUY and warn_up:
            warnings.append({"stock_id": TickerRef(ticker), "warning": "LIMIT_UP_RISK"})
        if side is execution.Side.SELL and warn_down:
            warnings.append({"stock_id": TickerRef(ticker), "warning": "LIMIT_DOWN_RISK"})

    params = execution.ExecParams.from_config(ctx.config)
    sim_acc, fills, rejections = execution.dry_run(ctx.account, orders, ctx.day, ctx.store, params)
    nav = execution.mark_value(sim_acc, ctx.cutoff, ctx.store)
    projected = {}
    for t in sorted(sim_acc.positions):
        found = ctx.store.close_at_or_before(t, ctx.cutoff)
        if found is None:
            continue
        value = found[0] * sim_acc.positions[t].shares_total
        projected[t] = float(value / float(nav)) if nav > 0 else 0.0
    violations = [
        {"stock_id": TickerRef(r.order.ticker), "code": r.reason.value, "detail": r.detail}
        for r in rejections
    ]
    return _stamp(ctx, {
        "valid": not violations,
        "violations": violations,
        "warnings": warnings,
        "projected_weights": {TickerRef(t): w for t, w in projected.items()},
        "projected_cash_weight": float(sim_acc.cash) / float(nav) if nav > 0 else 1.0,
    })


_TOOL_IMPLS = {
    "get_market_context": tool_get_market_context,
    "screen_candidates": tool_screen_candidates,
    "get_stock_snapshot": tool_get_stock_snapshot,
    "compare_candidates": tool_compare_candidates,
    "portfolio_state": tool_portfolio_state,
    "risk_check": tool_risk_check,
}


def dispatch(name: str, args: dict, ctx: ToolContext) -> ToolResult:
    """Run one tool call; returns a structured error instead of raising.

    Invalid names/arguments and unknown aliases come back as error
    ToolResults so the agent loop can inject feedback and continue.
    """
    if name not in _TOOL_IMPLS:
        return ToolResult(False, error=f"unknown tool {name!r}; available: {list(TOOL_NAMES)}",
                          error_code=UNKNOWN_TOOL)
    if not isinstance(args, dict):
        return ToolResult(False, error="tool arguments must be a JSON object",
                          error_code=INVALID_ARGUMENT)
    try:
        payload = _TOOL_IMPLS[name](ctx, copy.deepcopy(args))
    except ToolArgumentError as e:
        return ToolResult(False, error=str(e), error_code=INVALID_ARGUMENT)
    except UnknownAliasError as e:
        return ToolResult(False, error=str(e), error_code=INVALID_ARGUMENT)
    except MaskingError as e:
        return ToolResult(False, error=str(e), error_code=INVALID_ARGUMENT)
    return ToolResult(True, payload=payload)
