"""Episode runner: the two-phase research/submission loop.

One episode = one agent, one evaluation window, one (mode, level, seed)
cell. Each trading day the harness renders the user message from masked
data, answers tool calls (open-research only), demands a submission,
validates it with bounded retries, hands validated orders to the executor,
and marks NAV. Every identifying token that reaches the agent goes through
the episode's alias map; everything the agent sends back is resolved
through the same map.

All failure modes degrade to a logged fallback no-trade; nothing the agent
does can abort a step.
"""
from __future__ import annotations

import json
import logging
from dataclasses import dataclass, field
from decimal import Decimal

from .. import execution
from ..actions import UNKNOWN_ID, ValidationContext, Violation, validate_action
from ..data.market import MarketStore
from ..masking import AliasMap, DateRef, MaskLevel, TickerRef, leak_scan, mask
from ..tools import BUDGET_EXHAUSTED, TOOL_NOT_ALLOWED, ToolContext, ToolResult, dispatch
from .config import merge_config
from .prompts import SYSTEM_PROMPTS, render_user_message

logger = logging.getLogger(__name__)

MODES = ("memory_only", "fixed_candidate", "open_research")

#: hard cap on non-submit wire messages tolerated after the tool budget is
#: gone, before the harness escalates to an explicit submission demand
_POST_BUDGET_GRACE = 10


class StepClosed(RuntimeError):
    """Raised into an in-process agent that acts after its step ended."""


class MaskLeakError(RuntimeError):
    """A harness-side payload failed its own leak scan; this is a bug, not agent error."""


@dataclass
class StepRecord:
    step: int
    day_index: int
    date: str
    date_label: str
    user_message: str
    tool_calls: list = field(default_factory=list)
    submissions: list = field(default_factory=list)
    action: dict | None = None
    fallback: bool = False
    fallback_reason: str = ""
    parse_failure: bool = False
    orders_real: list = field(default_factory=list)
    fills: list = field(default_factory=list)
    rejections: list = field(default_factory=list)
    violation_messages: list = field(default_factory=list)
    mark_nav: float = 0.0
    mark_cash: float = 0.0
    positions_close: dict = field(default_factory=dict)
    weights_pre: dict = field(default_factory=dict)
    weights_post: dict = field(default_factory=dict)
    calib: list = field(default_factory=list)

    def to_json(self) -> dict:
        return {
            "step": self.step,
            "day_index": self.day_index,
            "date": self.date,
            "date_label": self.date_label,
            "user_message": self.user_message,
            "tool_calls": self.tool_calls,
            "submissions": self.submissions,
            "action": self.action,
            "fallback": self.fallback,
            "fallback_reason": self.fallback_reason,
            "parse_failure": self.parse_failure,
            "orders_real": self.orders_real,
            "fills": self.fills,
            "rejections": self.rejections,
            "violation_messages": self.violation_messages,
            "mark_nav": self.mark_nav,
            "mark_cash": self.mark_cash,
            "positions_close": self.positions_close,
            "weights_pre": self.weights_pre,
            "weights_post": self.weights_post,
            "calib": self.calib,
        }

    def agent_visible_text(self) -> str:
        """Concatenation of everything the agent could read this step."""
        parts = [self.user_message]
        for c in self.tool_calls:
            parts.append(json.dumps(c["result"], ensure_ascii=False, sort_keys=True))
        parts.extend(self.violation_messages)
        return "\n".join(parts)


@dataclass
class EpisodeResult:
    mode: str
    level: str
    seed: int
    window_start: int
    window_end: int
    agent_name: str
    config: dict
    market_id: str
    amap: AliasMap
    records: list[StepRecord] = field(default_factory=list)
    nav_series: list[tuple[int, Decimal]] = field(default_factory=list)
    benchmark_series: list[tuple[int, float]] = field(default_factory=list)
    dates: list[str] = field(default_factory=list)

    @property
    def nav_values(self) -> list[float]:
        return [float(v) for _, v in self.nav_series]

    @property
    def benchmark_values(self) -> list[float]:
        return [v for _, v in self.benchmark_series]


class StepSession:
    """State machine for one decision step.

    Driven either directly by an in-process agent through
    :class:`StepView`, or by the wire message loop. Phases: research (tools
    allowed under open-research), submission (only submits accepted),
    closed.
    """

    def __init__(
        self,
        record: StepRecord,
        tool_ctx: ToolContext,
        mode: str,
        config: dict,
        vctx: ValidationContext,
        privileged_ids: bool,
        store: MarketStore,
    ):
        self.record = record
        self.tool_ctx = tool_ctx
        self.mode = mode
        self.config = config
        self.vctx = vctx
        self.privileged_ids = privileged_ids
        self.store = store
        self.phase = "research"
        self.tool_budget_left = config["max_tool_calls_per_step"]
        self.attempts_left = 1 + config["schema_retries"]
        self.accepted_orders: list[execution.Order] | None = None
        self.accepted_action: dict | None = None

    # -- tools --------------------------------------------------------------

    def handle_tool_call(self, name, args) -> dict:
        if self.phase == "closed":
            raise StepClosed("step already closed")
        if self.phase == "submission":
            result = ToolResult(False, error="no tool calls are accepted after the submission demand",
                                error_code=TOOL_NOT_ALLOWED)
        elif self.mode != "open_research":
            result = ToolResult(False, error=f"tools are disabled in {self.mode} mode",
                                error_code=TOOL_NOT_ALLOWED)
        elif self.tool_budget_left <= 0:
            result = ToolResult(False, error="tool budget exhausted; submit your action now",
                                error_code=BUDGET_EXHAUSTED)
        else:
            self.tool_budget_left -= 1
            result = dispatch(name if isinstance(name, str) else "", args, self.tool_ctx)
            if result.ok:
                masked = mask(result.payload, self.tool_ctx.amap)
                leaks = leak_scan(masked, self.tool_ctx.amap)
                if leaks:
                    raise MaskLeakError(f"tool {name} payload leaked: {leaks[:3]}")
                result = ToolResult(True, payload=masked)
        wire = result.wire()
        self.record.tool_calls.append({
            "index": len(self.record.tool_calls),
            "name": name,
            "args": args,
            "ok": result.ok,
            "result": wire,
        })
        return wire

    # -- submissions ----------------------------------------------------------

    def demand_submission(self) -> None:
        if self.phase == "research":
            self.phase = "submission"

    def handle_submit(self, raw: str) -> tuple[str, dict | None]:
        """Validate one raw submission.

        Returns ("accepted", None), ("violation", feedback) when a retry is
        available, or ("fallback", None) once attempts are exhausted.
        """
        if self.phase == "closed":
            raise StepClosed("step already closed")
        self.demand_submission()
        self.attempts_left -= 1
        doc, violations = validate_action(raw, self.vctx)
        orders: list[execution.Order] = []
        if doc is not None:
            orders, id_violations = self._resolve_orders(doc.orders)
            violations = id_violations
            if violations:
                doc = None
        entry = {
            "raw": raw,
            "ok": doc is not None,
            "violations": [{"code": v.code, "message": v.message} for v in violations],
        }
        self.record.submissions.append(entry)
        if doc is not None:
            self.accepted_action = {"orders": doc.orders, "overall_reason": doc.overall_reason}
            self.accepted_orders = orders
            self.record.action = self.accepted_action
            self.phase = "closed"
            return "accepted", None
        if self.attempts_left > 0:
            detail = "; ".join(v.message for v in violations)
            if not self.config["retry_with_feedback"]:
                detail = "submission failed validation; correct it and resubmit"
            feedback = {"codes": [v.code for v in violations], "detail": detail}
            self.record.violation_messages.append(detail)
            return "violation", feedback
        self.force_fallback("validation failed after all retries", parse_failure=True)
        return "fallback", None

    def _resolve_orders(self, order_dicts: list[dict]) -> tuple[list[execution.Order], list[Violation]]:
        orders = []
        violations = []
        for i, o in enumerate(order_dicts):
            sid = o["stock_id"]
            if self.privileged_ids:
                if not self.store.has_ticker(sid):
                    violations.append(Violation(UNKNOWN_ID, f"orders[{i}].stock_id {sid!r} is not in the store"))
                    continue
                ticker = sid
            else:
                try:
                    ticker = self.tool_ctx.amap.resolve_ticker(sid)
                except Exception:
                    violations.append(Violation(
                        UNKNOWN_ID, f"orders[{i}].stock_id {sid!r} is not a known identifier"))
                    continue
            orders.append(execution.Order(
                ticker=ticker,
                side=execution.Side(o["side"]),
                target_weight=o.get("target_weight"),
                shares=o.get("shares"),
                confidence=float(o["confidence"]),
                reason=o["reason"],
            ))
        return orders, violations

    def force_fallback(self, reason: str, parse_failure: bool = True) -> None:
        if self.phase == "closed":
            return
        self.phase = "closed"
        self.record.fallback = True
        self.record.fallback_reason = reason
        self.record.parse_failure = parse_failure
        self.accepted_orders = []
        self.accepted_action = None


class StepView:
    """Synchronous driving surface handed to in-process agents."""

    def __init__(self, session: StepSession, user_text: str, data: dict,
                 step_index: int, privileged_ctx=None):
        self._session = session
        self.user_text = user_text
        self.data = data
        self.step_index = step_index
        self.mode = session.mode
        self.privileged_ctx = privileged_ctx

    def call_tool(self, name: str, args: dict) -> dict:
        return self._session.handle_tool_call(name, args)

    def submit(self, raw: str) -> dict | None:
        """Returns None when accepted, violation feedback when retryable."""
        status, feedback = self._session.handle_submit(raw)
        if status == "accepted":
            return None
        if status == "violation":
            return feedback
        return {"codes": ["fallback"], "detail": "attempts exhausted; step fell back to no-trade"}


def _fill_price(store: MarketStore, ticker: str, fill_day: int) -> float | None:
    if store.has_bar(ticker, fill_day):
        return store.bar(ticker, fill_day).open
    found = store.close_at_or_before(ticker, fill_day)
    return found[0] if found else None


def _nav_weights(account: execution.Account, store: MarketStore, fill_day: int) -> dict[str, float]:
    values = {}
    for t in sorted(account.positions):
        px = _fill_price(store, t, fill_day)
        if px is None:
            continue
        values[t] = px * account.positions[t].shares_total
    nav = float(account.cash) + sum(values.values())
    if nav <= 0:
        return {t: 0.0 for t in values}
    return {t: v / nav for t, v in values.items()}


def _fixed_candidate_pool(store: MarketStore, day: int, per_factor: int) -> list:
    """Union of per-factor top lists: ret_20d desc, ret_5d desc, vol_20d asc."""
    members = store.universe(day).members
    rows = [r for r in store.features(day, members) if not r.missing]
    picks: list[str] = []
    for key, reverse in (("ret_20d", True), ("ret_5d", True), ("vol_20d", False)):
        usable = [r for r in rows if r.value(key) is not None]
        usable.sort(key=lambda r: ((-r.value(key)) if reverse else r.value(key), r.ticker))
        for r in usable[:per_factor]:
            if r.ticker not in picks:
                picks.append(r.ticker)
    return sorted(picks)


def _feature_table_data(store: MarketStore, day: int, tickers, amap: AliasMap) -> list[dict]:
    rows = store.features(day, tickers)
    out = []
    for r in rows:
        out.append(mask({
            "stock_id": TickerRef(r.ticker),
            "prev_close": r.prev_close,
            "ret_1d": r.ret_1d,
            "ret_5d": r.ret_5d,
            "ret_20d": r.ret_20d,
            "vol_20d": r.vol_20d,
            "drawdown_20d": r.drawdown_20d,
        }, amap))
    return out


def _positions_data(account: execution.Account, store: MarketStore, cutoff: int, amap: AliasMap) -> list[dict]:
    nav = execution.mark_value(account, cutoff, store)
    out = []
    for t in sorted(account.positions):
        pos = account.positions[t]
        found = store.close_at_or_before(t, cutoff)
        last_close = found[0] if found else None
        weight = None
        unreal = None
        if last_close is not None:
            unreal = round((last_close - float(pos.avg_cost)) * pos.shares_total, 2)
            weight = last_close * pos.shares_total / float(nav) if nav > 0 else 0.0
        out.append(mask({
            "stock_id": TickerRef(t),
            "shares_total": pos.shares_total,
            "shares_available": pos.shares_available,
            "avg_cost": float(pos.avg_cost),
            "last_close": last_close,
            "weight": weight,
            "unrealized_pnl": unreal,
        }, amap))
    return out


def _masked_exec_summary(fills, rejections, fallback: bool, amap: AliasMap) -> dict:
    return {
        "fills": [mask({
            "stock_id": TickerRef(f.ticker),
            "side": f.side.value,
            "shares": f.shares,
            "price": f.price,
            "cost": str(f.cost),
            "note": f.note,
        }, amap) for f in fills],
        "rejections": [mask({
            "stock_id": TickerRef(r.order.ticker),
            "side": r.order.side.value,
            "code": r.reason.value,
            "detail": r.detail,
        }, amap) for r in rejections],
        "fallback": fallback,
    }


def run_episode(
    store: MarketStore,
    mode: str,
    level: MaskLevel | str,
    window: tuple[int, int],
    agent,
    seed: int,
    config: dict | None = None,
    agent_name: str | None = None,
) -> EpisodeResult:
    """Run one full episode and return its in-memory result.

    `agent` is either an in-process agent object (see harness.agents) or a
    wire endpoint (see harness.wire). `window` is a pair of calendar
    indices, inclusive; the day after the window end must exist so the last
    step can fill.
    """
    if isinstance(level, str):
        level = MaskLevel(level)
    if mode not in MODES:
        raise ValueError(f"unknown mode {mode!r}; choose from {MODES}")
    config = merge_config(config)
    start, end = window
    if start < 0 or end >= len(store.calendar) or start > end:
        raise ValueError("window must lie inside the calendar")
    if end + 1 >= len(store.calendar):
        raise ValueError("window must end before the last calendar day so final orders can fill")

    amap = AliasMap(store.tickers, level, seed=seed, anchor_index=start, calendar=store.calendar)
    account = execution.Account.with_cash(config["initial_cash"])
    params = execution.ExecParams.from_config(config)
    privileged = bool(getattr(agent, "privileged", False))

    from .wire import WireEndpoint  # local import to avoid a cycle

    is_wire = isinstance(agent, WireEndpoint)
    name = agent_name or getattr(agent, "name", None) or ("wire-agent" if is_wire else "agent")

    result = EpisodeResult(
        mode=mode,
        level=level.value,
        seed=seed,
        window_start=start,
        window_end=end,
        agent_name=name,
        config=dict(config),
        market_id=store.market_id,
        amap=amap,
    )
    if is_wire:
        agent.start()

    index_rets = store.index_daily_returns()
    bench_nav = float(config["initial_cash"])
    prev_exec_summary: dict | None = None

    for step_i, day in enumerate(range(start, end + 1)):
        execution.unlock_t1(account)
        cutoff = day - 1

        # agent-visible account valuation uses only cutoff closes
        nav_visible = execution.mark_value(account, cutoff, store)
        universe_aliases = [mask(TickerRef(t), amap) for t in store.universe(day).members]
        universe_aliases.sort()

        pool_real: list[str] = []
        features_table: list[dict] = []
        if mode == "fixed_candidate":
            pool_real = _fixed_candidate_pool(store, day, config["fixed_candidate_per_factor"])
            features_table = _feature_table_data(store, day, pool_real, amap)

        port_cum = 0.0
        if account.nav_series:
            port_cum = float(account.nav_series[-1][1] / account.initial_cash) - 1.0
        bench_cum = bench_nav / float(config["initial_cash"]) - 1.0

        data = {
            "step_index": step_i,
            "date_label": mask(DateRef(day), amap),
            "data_cutoff": mask(DateRef(cutoff), amap),
            "mode": mode,
            "total_value": float(nav_visible),
            "cash": float(account.cash),
            "cash_weight": float(account.cash) / float(nav_visible) if nav_visible > 0 else 1.0,
            "positions": _positions_data(account, store, cutoff, amap),
            "universe": universe_aliases,
            "features_table": features_table,
            "prev_execution": prev_exec_summary,
            "portfolio_ret_cum": port_cum,
            "benchmark_ret_cum": bench_cum,
        }
        user_text = render_user_message(data, config["benchmark"], config["universe_preview_limit"])
        leaks = leak_scan(user_text, amap)
        if leaks:
            raise MaskLeakError(f"user message leaked: {leaks[:3]}")

        record = StepRecord(
            step=step_i,
            day_index=day,
            date=store.calendar.date(day).isoformat(),
            date_label=data["date_label"],
            user_message=user_text,
        )
        tool_ctx = ToolContext(store, account, day, amap, config)
        vctx = ValidationContext(
            mode=mode,
            min_reason_length=config["min_reason_length"],
            max_single_weight=config["max_single_weight"],
            max_positions=config["max_positions"],
            candidate_pool=frozenset(mask(TickerRef(t), amap) for t in pool_real),
            holdings=frozenset(mask(TickerRef(t), amap) for t in account.positions),
            lenient_json=config["lenient_json"],
        )
        session = StepSession(record, tool_ctx, mode, config, vctx, privileged, store)

        if is_wire:
            system_text = SYSTEM_PROMPTS[mode] if step_i == 0 else None
            _drive_wire_step(agent, session, step_i, user_text, data, config, system_text)
        else:
            _drive_inproc_step(agent, session, user_text, data, step_i,
                               store=store, account=account, day=day, params=params)

        if session.phase != "closed":
            session.force_fallback("agent ended the step without an accepted submission")

        orders = session.accepted_orders or []
        record.orders_real = [o.echo() for o in orders]

        # NAV at today's close reflects the book held through today;
        # today's decision fills at tomorrow's open.
        nav = execution.mark(account, day, store)
        record.mark_nav = float(nav)
        record.mark_cash = float(account.cash)
        for t in sorted(account.positions):
            found = store.close_at_or_before(t, day)
            if found is not None:
                record.positions_close[t] = found[0] * account.positions[t].shares_total
        result.nav_series.append((day, nav))
        if step_i > 0:
            bench_nav *= 1.0 + float(index_rets[day])
        result.benchmark_series.append((day, bench_nav))
        result.dates.append(store.calendar.date(day).isoformat())

        record.weights_pre = _nav_weights(account, store, day + 1)
        fills, rejections = execution.step(account, orders, day, store, params)
        record.weights_post = _nav_weights(account, store, day + 1)
        record.fills = [{
            "ticker": f.ticker, "side": f.side.value, "shares": f.shares, "price": f.price,
            "notional": str(f.notional), "cost": str(f.cost), "fill_day": f.fill_day, "note": f.note,
        } for f in fills]
        record.rejections = [{
            "ticker": r.order.ticker, "side": r.order.side.value,
            "code": r.reason.value, "detail": r.detail,
        } for r in rejections]

        prev_exec_summary = _masked_exec_summary(fills, rejections, record.fallback, amap)
        result.records.append(record)

    if is_wire:
        agent.finish()

    _fill_calibration(result, store)
    return result


def _drive_inproc_step(agent, session: StepSession, user_text: str, data: dict,
                       step_i: int, store, account, day, params) -> None:
    priv_ctx = None
    if getattr(agent, "privileged", False):
        priv_ctx = {"store": store, "account": account, "day": day, "params": params}
    view = StepView(session, user_text, data, step_i, privileged_ctx=priv_ctx)
    try:
        agent.run_step(view)
    except StepClosed:
        pass
    except Exception as e:  # noqa: BLE001 - agent faults must not kill the episode
        logger.warning("agent raised during step %d: %r", step_i, e)
        session.force_fallback(f"agent exception: {e!r}")


def _drive_wire_step(endpoint, session: StepSession, step_i: int, user_text: str,
                     data: dict, config: dict, system_text: str | None = None) -> None:
    from .wire import WireProtocolError

    try:
        _drive_wire_step_inner(endpoint, session, step_i, user_text, data, config, system_text)
    except WireProtocolError as e:
        session.force_fallback(f"agent stream error: {e}")


def _drive_wire_step_inner(endpoint, session: StepSession, step_i: int, user_text: str,
                           data: dict, config: dict, system_text: str | None) -> None:
    from .wire import WireProtocolError

    content = {"text": user_text, "data": data}
    if system_text is not None:
        content["system"] = system_text
        content["llm"] = {k: config[k] for k in ("temperature", "max_tokens", "timeout_s", "inter_call_gap_s")}
    endpoint.send({"type": "user_message", "step": step_i, "content": content})
    if session.mode != "open_research":
        session.demand_submission()
        endpoint.send({"type": "submission_demand"})

    garbage_streak = 0
    messages_seen = 0
    post_demand_nonsubmit = 0
    demanded = session.phase == "submission"
    # hard liveness bound: the step ends even against a message-flooding agent
    message_cap = config["max_tool_calls_per_step"] + _POST_BUDGET_GRACE + 8 * (1 + config["schema_retries"])
    while session.phase != "closed":
        try:
            msg = endpoint.recv(timeout=config["timeout_s"])
        except TimeoutError:
            session.force_fallback("agent timeout")
            return
        except (EOFError, WireProtocolError) as e:
            session.force_fallback(f"agent stream error: {e}")
            return
        messages_seen += 1
        if messages_seen > message_cap:
            session.force_fallback("per-step message cap exceeded")
            return
        if not isinstance(msg, dict) or "type" not in msg:
            garbage_streak += 1
            endpoint.send({"type": "violation", "codes": ["not_json"],
                           "detail": "message was not a JSON object with a type field"})
            if garbage_streak >= 3:
                session.force_fallback("repeated unparseable messages")
                return
            continue
        garbage_streak = 0
        mtype = msg.get("type")
        if mtype == "tool_call":
            wire = session.handle_tool_call(msg.get("name"), msg.get("args") or {})
            endpoint.send({"type": "tool_result", "call_id": msg.get("call_id"), "payload": wire})
            if demanded or session.phase == "submission":
                post_demand_nonsubmit += 1
                if post_demand_nonsubmit > 2 + config["schema_retries"]:
                    session.force_fallback("kept calling tools after the submission demand")
                    return
            elif session.tool_budget_left <= 0 and \
                    messages_seen > config["max_tool_calls_per_step"] + _POST_BUDGET_GRACE:
                session.demand_submission()
                endpoint.send({"type": "submission_demand"})
                demanded = True
        elif mtype == "submit":
            raw = msg.get("action")
            raw_text = raw if isinstance(raw, str) else json.dumps(raw, ensure_ascii=False)
            status, feedback = session.handle_submit(raw_text)
            if status == "violation":
                endpoint.send({"type": "violation", "codes": feedback["codes"], "detail": feedback["detail"]})
        else:
            endpoint.send({"type": "violation", "codes": ["unknown_message_type"],
                           "detail": f"unsupported message type {mtype!r}"})
            garbage_streak += 1
            if garbage_streak >= 3:
                session.force_fallback("repeated protocol violations")
                return


def _fill_calibration(result: EpisodeResult, store: MarketStore) -> None:
    """Attach the actionable-horizon outcome return to every submitted order.

    The reference horizon is next open to next-next open; orders whose
    horizon runs past the calendar get no outcome and drop out of the
    calibration metrics.
    """
    n = len(store.calendar)
    for rec in result.records:
        d = rec.day_index
        for o in rec.orders_real:
            t = o["ticker"]
            ret = None
            if d + 2 < n and store.has_bar(t, d + 1) and store.has_bar(t, d + 2):
                p1 = store.bar(t, d + 1).open
                p2 = store.bar(t, d + 2).open
                ret = p2 / p1 - 1.0
            rec.calib.append({
                "ticker": t,
                "side": o["side"],
                "confidence": o["confidence"],
                "next_ret": ret,
            })


def write_episode(result: EpisodeResult, out_dir) -> None:
    """Serialize an episode deterministically into a directory."""
    from pathlib import Path

    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)

    meta = {
        "mode": result.mode,
        "level": result.level,
        "seed": result.seed,
        "window_start": result.window_start,
        "window_end": result.window_end,
        "agent": result.agent_name,
        "market_id": result.market_id,
        "config": result.config,
    }
    (out / "config.json").write_text(json.dumps(meta, indent=2, sort_keys=True) + "\n", encoding="utf-8")
    (out / "alias_map.json").write_text(
        json.dumps(result.amap.to_json(), indent=2, sort_keys=True) + "\n", encoding="utf-8")

    with open(out / "steps.jsonl", "w", encoding="utf-8") as fh:
        for rec in result.records:
            fh.write(json.dumps(rec.to_json(), ensure_ascii=False, sort_keys=True) + "\n")

    with open(out / "trades.jsonl", "w", encoding="utf-8") as fh:
        for rec in result.records:
            for f in rec.fills:
                fh.write(json.dumps({"step": rec.step, "kind": "fill", **f},
                                    ensure_ascii=False, sort_keys=True) + "\n")
            for r in rec.rejections:
                fh.write(json.dumps({"step": rec.step, "kind": "rejection", **r},
                                    ensure_ascii=False, sort_keys=True) + "\n")

    with open(out / "nav.csv", "w", encoding="utf-8") as fh:
        fh.write("date,nav\n")
        for (idx, nav), date in zip(result.nav_series, result.dates):
            fh.write(f"{date},{nav}\n")
    with open(out / "benchmark_nav.csv", "w", encoding="utf-8") as fh:
        fh.write("date,nav\n")
        for (idx, nav), date in zip(result.benchmark_series, result.dates):
            fh.write(f"{date},{nav:.6f}\n")


def load_episode(ep_dir) -> dict:
    """Light-weight reload of a serialized episode for metrics/attribution."""
    from pathlib import Path

    ep = Path(ep_dir)
    meta = json.loads((ep / "config.json").read_text(encoding="utf-8"))
    records = [json.loads(line) for line in (ep / "steps.jsonl").read_text(encoding="utf-8").splitlines()]
    nav = []
    dates = []
    with open(ep / "nav.csv", "r", encoding="utf-8") as fh:
        next(fh)
        for line in fh:
            date, v = line.strip().split(",")
            dates.append(date)
            nav.append(float(v))
    bench = []
    with open(ep / "benchmark_nav.csv", "r", encoding="utf-8") as fh:
        next(fh)
        for line in fh:
            bench.append(float(line.strip().split(",")[1]))
    meta.update({"records": records, "nav": nav, "benchmark": bench, "dates": dates})
    return meta
