"""Action-document parsing and constraint validation.

A submission is one JSON object: an ``orders`` list plus an
``overall_reason`` string. Each violation carries a stable machine code and
a human sentence; the harness quotes the sentences verbatim in retry
feedback. Identifier resolution (alias to real ticker) is not done here;
validation sees identifiers exactly as the agent wrote them.
"""
from __future__ import annotations

import json
import re
from dataclasses import dataclass

# machine codes
NOT_JSON = "not_json"
NOT_OBJECT = "not_object"
ORDERS_MISSING = "orders_missing"
ORDER_NOT_OBJECT = "order_not_object"
STOCK_ID_MISSING = "stock_id_missing"
SIDE_INVALID = "side_invalid"
WEIGHT_SHARES_EXCLUSIVE = "weight_shares_exclusive"
WEIGHT_RANGE = "weight_range"
WEIGHT_ABOVE_CAP = "weight_above_cap"
SHARES_POSITIVE = "shares_positive"
CONFIDENCE_RANGE = "confidence_range"
REASON_TOO_SHORT = "reason_too_short"
OVERALL_REASON_TOO_SHORT = "overall_reason_too_short"
BUY_OUTSIDE_POOL = "buy_outside_pool"
TOO_MANY_POSITIONS = "too_many_positions"
UNKNOWN_ID = "unknown_id"
MARKDOWN_FENCE = "markdown_fence"

_FENCE_RE = re.compile(r"^```[a-zA-Z0-9_-]*\s*(.*?)\s*```$", re.DOTALL)


@dataclass(frozen=True)
class Violation:
    code: str
    message: str


@dataclass
class ActionDocument:
    """A validated submission; identifiers still in agent (possibly alias) form."""

    orders: list[dict]
    overall_reason: str
    lenient_fence_stripped: bool = False

    @property
    def is_abstention(self) -> bool:
        return len(self.orders) == 0


@dataclass
class ValidationContext:
    mode: str                       # "memory_only" | "fixed_candidate" | "open_research"
    min_reason_length: int = 10
    max_single_weight: float = 1.0
    max_positions: int = 300
    candidate_pool: frozenset[str] = frozenset()
    holdings: frozenset[str] = frozenset()
    lenient_json: bool = False


def _parse_json(raw: str, lenient: bool) -> tuple[dict | None, bool, list[Violation]]:
    text = raw.strip()
    stripped = False
    m = _FENCE_RE.match(text)
    if m:
        if lenient:
            text = m.group(1)
            stripped = True
        else:
            return None, False, [Violation(
                MARKDOWN_FENCE, "submission must be a bare JSON object without markdown code fences")]
    try:
        obj = json.loads(text)
    except json.JSONDecodeError as e:
        return None, stripped, [Violation(NOT_JSON, f"submission is not valid JSON: {e.msg} at position {e.pos}")]
    if not isinstance(obj, dict):
        return None, stripped, [Violation(NOT_OBJECT, "submission must be a single JSON object")]
    return obj, stripped, []


def _check_order(o, i: int, ctx: ValidationContext, violations: list[Violation]) -> None:
    where = f"orders[{i}]"
    if not isinstance(o, dict):
        violations.append(Violation(ORDER_NOT_OBJECT, f"{where} must be a JSON object"))
        return
    sid = o.get("stock_id")
    if not isinstance(sid, str) or not sid:
        violations.append(Violation(STOCK_ID_MISSING, f"{where}.stock_id must be a non-empty string"))
    side = o.get("side")
    if side not in ("BUY", "SELL"):
        violations.append(Violation(SIDE_INVALID, f"{where}.side must be BUY or SELL"))
    has_w = "target_weight" in o and o["target_weight"] is not None
    has_s = "shares" in o and o["shares"] is not None
    if has_w == has_s:
        violations.append(Violation(
            WEIGHT_SHARES_EXCLUSIVE,
            f"{where} must carry exactly one of target_weight or shares; they are mutually exclusive"))
    if has_w:
        w = o["target_weight"]
        if not isinstance(w, (int, float)) or isinstance(w, bool) or not 0.0 <= float(w) <= 1.0:
            violations.append(Violation(WEIGHT_RANGE, f"{where}.target_weight must be a number in [0, 1]"))
        elif float(w) > ctx.max_single_weight:
            violations.append(Violation(
                WEIGHT_ABOVE_CAP,
                f"{where}.target_weight exceeds the configured single-name cap {ctx.max_single_weight}"))
    if has_s:
        s = o["shares"]
        if not isinstance(s, int) or isinstance(s, bool) or s <= 0:
            violations.append(Violation(SHARES_POSITIVE, f"{where}.shares must be a positive integer"))
    c = o.get("confidence")
    if not isinstance(c, (int, float)) or isinstance(c, bool) or not 0.0 <= float(c) <= 1.0:
        violations.append(Violation(CONFIDENCE_RANGE, f"{where}.confidence must be a number in [0, 1]"))
    reason = o.get("reason")
    if not isinstance(reason, str) or len(reason) < ctx.min_reason_length:
        violations.append(Violation(
            REASON_TOO_SHORT,
            f"{where}.reason must be a string of at least {ctx.min_reason_length} characters"))
    if (
        ctx.mode == "fixed_candidate"
        and side == "BUY"
        and isinstance(sid, str)
        and ctx.candidate_pool
        and sid not in ctx.candidate_pool
    ):
        violations.append(Violation(
            BUY_OUTSIDE_POOL, f"{where}.stock_id {sid!r} is outside the fixed candidate pool"))


def validate_action(raw: str, ctx: ValidationContext) -> tuple[ActionDocument | None, list[Violation]]:
    """Parse and validate one raw submission string.

    Returns (document, []) on success or (None, violations) on failure.
    SELL ids outside current holdings are advisory only; the executor is the
    authority on share availability.
    """
    obj, stripped, violations = _parse_json(raw, ctx.lenient_json)
    if obj is None:
        return None, violations

    orders = obj.get("orders")
    if not isinstance(orders, list):
        violations.append(Violation(ORDERS_MISSING, "top-level 'orders' must be a list (may be empty)"))
        orders = []
    overall = obj.get("overall_reason")
    if not isinstance(overall, str) or len(overall) < 20:
        violations.append(Violation(
            OVERALL_REASON_TOO_SHORT, "top-level 'overall_reason' must be a string of at least 20 characters"))

    for i, o in enumerate(orders):
        _check_order(o, i, ctx, violations)

    buy_ids = {o.get("stock_id") for o in orders
               if isinstance(o, dict) and o.get("side") == "BUY" and isinstance(o.get("stock_id"), str)}
    if len(ctx.holdings | buy_ids) > ctx.max_positions:
        violations.append(Violation(
            TOO_MANY_POSITIONS,
            f"orders would push the book above the {ctx.max_positions}-position cap"))

    if violations:
        return None, violations
    # canonicalize numerics so logs do not depend on the agent's JSON dialect
    # (an integer-valued target_weight like 0 is the float 0.0 downstream)
    canon = []
    for o in orders:
        c = dict(o)
        if c.get("target_weight") is not None:
            c["target_weight"] = float(c["target_weight"])
        c["confidence"] = float(c["confidence"])
        canon.append(c)
    return ActionDocument(orders=canon, overall_reason=overall, lenient_fence_stripped=stripped), []
