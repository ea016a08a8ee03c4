"""Deterministic next-open executor with A-share microstructure rules.

Money is fixed-point decimal at a 0.01 CNY quantum and share counts are
integer round lots of 100, so cash conservation is exact rather than a
floating-point approximation. Orders are processed strictly in submitted
sequence; every order yields exactly one Fill or one Rejection and nothing
aborts a step.

Timing model: a step decided on day d fills at the open of day d+1; the
price-limit filter compares that open against day d's close. Shares bought
within a step are locked for that step (T+1) and must be unlocked by the
caller before the next step via :func:`unlock_t1`.
"""
from __future__ import annotations

import logging
from dataclasses import dataclass, field
from decimal import ROUND_DOWN, ROUND_HALF_UP, Decimal
from enum import Enum

from .data.market import MarketStore

logger = logging.getLogger(__name__)

CENT = Decimal("0.01")
LOT = 100


def money(x) -> Decimal:
    """Exact decimal of a float's shortest repr, quantized to 0.01 CNY."""
    return Decimal(repr(float(x))).quantize(CENT, rounding=ROUND_HALF_UP)


def raw_dec(x) -> Decimal:
    return Decimal(repr(float(x)))


class Side(Enum):
    BUY = "BUY"
    SELL = "SELL"


class RejectReason(Enum):
    LIMIT_UP_BUY = "LIMIT_UP_BUY"
    LIMIT_DOWN_SELL = "LIMIT_DOWN_SELL"
    T1_LOCKED = "T1_LOCKED"
    INSUFFICIENT_CASH = "INSUFFICIENT_CASH"
    INSUFFICIENT_SHARES = "INSUFFICIENT_SHARES"
    NOT_IN_UNIVERSE = "NOT_IN_UNIVERSE"
    UNFILLABLE_ONE_SIDED = "UNFILLABLE_ONE_SIDED"
    SCHEMA = "SCHEMA"


@dataclass
class Order:
    ticker: str
    side: Side
    target_weight: float | None = None
    shares: int | None = None
    confidence: float = 0.5
    reason: str = ""

    def __post_init__(self):
        if (self.target_weight is None) == (self.shares is None):
            raise ValueError("exactly one of target_weight or shares must be set")
        if self.target_weight is not None and not 0.0 <= self.target_weight <= 1.0:
            raise ValueError("target_weight must lie in [0, 1]")
        if self.shares is not None and self.shares <= 0:
            raise ValueError("shares must be positive")
        if not 0.0 <= self.confidence <= 1.0:
            raise ValueError("confidence must lie in [0, 1]")

    def echo(self) -> dict:
        return {
            "ticker": self.ticker,
            "side": self.side.value,
            "target_weight": self.target_weight,
            "shares": self.shares,
            "confidence": self.confidence,
            "reason": self.reason,
        }


@dataclass
class Fill:
    ticker: str
    side: Side
    shares: int
    price: float
    notional: Decimal
    cost: Decimal
    fill_day: int
    note: str = ""
    order: Order | None = None


@dataclass
class Rejection:
    order: Order
    reason: RejectReason
    detail: str = ""


@dataclass
class Position:
    shares_total: int = 0
    shares_available: int = 0
    avg_cost: Decimal = Decimal("0")
    stale_mark: bool = False


@dataclass
class Account:
    cash: Decimal
    initial_cash: Decimal
    positions: dict[str, Position] = field(default_factory=dict)
    nav_series: list[tuple[int, Decimal]] = field(default_factory=list)

    @classmethod
    def with_cash(cls, cash) -> "Account":
        c = money(cash)
        return cls(cash=c, initial_cash=c)

    def copy(self) -> "Account":
        acc = Account(cash=self.cash, initial_cash=self.initial_cash)
        acc.positions = {
            t: Position(p.shares_total, p.shares_available, p.avg_cost, p.stale_mark)
            for t, p in self.positions.items()
        }
        acc.nav_series = list(self.nav_series)
        return acc


def unlock_t1(account: Account) -> None:
    """Make all held shares sellable. Call at the start of each trading step."""
    for p in account.positions.values():
        p.shares_available = p.shares_total


@dataclass(frozen=True)
class ExecParams:
    buy_rate: Decimal = Decimal("0.0005")
    sell_rate: Decimal = Decimal("0.0015")
    min_cost: Decimal = Decimal("5")
    cash_buffer_frac: Decimal = Decimal("0.01")

    @classmethod
    def from_config(cls, cfg: dict) -> "ExecParams":
        return cls(
            buy_rate=Decimal(cfg["buy_cost_bps"]) / Decimal(10_000),
            sell_rate=Decimal(cfg["sell_cost_bps"]) / Decimal(10_000),
            min_cost=Decimal(cfg["min_cost_cny"]),
            cash_buffer_frac=Decimal(str(cfg.get("cash_buffer_frac", "0.01"))),
        )


def _fee(notional: Decimal, rate: Decimal, params: ExecParams) -> Decimal:
    fee = (notional * rate).quantize(CENT, rounding=ROUND_HALF_UP)
    floor = params.min_cost.quantize(CENT)
    return fee if fee >= floor else floor


def mark_value(account: Account, day: int, store: MarketStore) -> Decimal:
    """NAV at day's close without touching the account's NAV series."""
    nav = account.cash
    for t, pos in account.positions.items():
        found = store.close_at_or_before(t, day)
        if found is None:
            continue
        close, _ = found
        nav += (raw_dec(close) * pos.shares_total).quantize(CENT, rounding=ROUND_HALF_UP)
    return nav


def mark(account: Account, day: int, store: MarketStore) -> Decimal:
    """Mark NAV at day's close and append it to the account's NAV series.

    A held name without a bar on `day` is valued at its last known close and
    flagged stale.
    """
    nav = account.cash
    for t in sorted(account.positions):
        pos = account.positions[t]
        found = store.close_at_or_before(t, day)
        if found is None:
            pos.stale_mark = True
            continue
        close, at = found
        pos.stale_mark = at != day
        nav += (raw_dec(close) * pos.shares_total).quantize(CENT, rounding=ROUND_HALF_UP)
    account.nav_series.append((day, nav))
    return nav


def _resolve_shares(
    order: Order,
    account: Account,
    nav_est: Decimal,
    est_price: Decimal,
    rejections: list[Rejection],
) -> int | None:
    """Turn a target_weight or share count into a round-lot share count.

    Returns None after recording a rejection when the resolution is empty
    (target already met, or request below one lot).
    """
    pos = account.positions.get(order.ticker)
    held = pos.shares_total if pos else 0
    if order.shares is not None:
        lots = (order.shares // LOT) * LOT
        if lots <= 0:
            code = RejectReason.INSUFFICIENT_CASH if order.side is Side.BUY else RejectReason.INSUFFICIENT_SHARES
            rejections.append(Rejection(order, code, "share count below one round lot of 100"))
            return None
        return lots

    target_val = Decimal(repr(order.target_weight)) * nav_est
    cur_val = est_price * held
    diff = target_val - cur_val
    if order.side is Side.BUY:
        if diff <= 0:
            rejections.append(
                Rejection(order, RejectReason.INSUFFICIENT_CASH,
                          "target weight already at or above requested level; resolved to 0 lots")
            )
            return None
        lots = int((diff / est_price) // LOT) * LOT
        if lots <= 0:
            rejections.append(
                Rejection(order, RejectReason.INSUFFICIENT_CASH,
                          "weight gap below one round lot; resolved to 0 lots")
            )
            return None
        return lots
    # SELL: only the excess above target is sold
    if diff >= 0:
        rejections.append(
            Rejection(order, RejectReason.INSUFFICIENT_SHARES,
                      "holding already at or below target weight; nothing to sell")
        )
        return None
    lots = int(((-diff) / est_price) // LOT) * LOT
    if order.target_weight == 0.0:
        lots = held  # full exit should not strand a rounding residue
    if lots <= 0:
        rejections.append(
            Rejection(order, RejectReason.INSUFFICIENT_SHARES,
                      "weight gap below one round lot; resolved to 0 lots")
        )
        return None
    return lots


def step(
    account: Account,
    orders: list[Order],
    day: int,
    store: MarketStore,
    params: ExecParams | None = None,
) -> tuple[list[Fill], list[Rejection]]:
    """Execute one decision step: fills at the next day's open.

    The account is mutated in place and every submitted order is answered by
    exactly one Fill or Rejection, in submitted sequence.
    """
    params = params or ExecParams()
    fill_day = day + 1
    if fill_day >= len(store.calendar):
        raise ValueError("decision day has no following trading day to fill on")
    return _run_orders(account, orders, day, store, params, pit_safe=False)


def dry_run(
    account: Account,
    orders: list[Order],
    day: int,
    store: MarketStore,
    params: ExecParams | None = None,
) -> tuple[Account, list[Fill], list[Rejection]]:
    """Simulate a step on a copy of the account, without next-day data.

    Fills are priced at the last close visible at decision time (the day
    before `day`), so the simulation only reads information the agent could
    see. Limit and one-sided checks are skipped because they depend on the
    unseen next open.
    """
    params = params or ExecParams()
    acc = account.copy()
    fills, rejections = _run_orders(acc, orders, day, store, params, pit_safe=True)
    return acc, fills, rejections


def _run_orders(
    account: Account,
    orders: list[Order],
    day: int,
    store: MarketStore,
    params: ExecParams,
    pit_safe: bool,
) -> tuple[list[Fill], list[Rejection]]:
    fills: list[Fill] = []
    rejections: list[Rejection] = []
    fill_day = day + 1
    price_day = day - 1 if pit_safe else day

    nav_est = mark_value(account, price_day, store)
    buffer = (nav_est * params.cash_buffer_frac).quantize(CENT, rounding=ROUND_HALF_UP)

    for order in orders:
        if not store.has_ticker(order.ticker):
            rejections.append(Rejection(order, RejectReason.NOT_IN_UNIVERSE, "unknown ticker"))
            continue
        prev = store.close_at_or_before(order.ticker, price_day)
        if prev is None:
            rejections.append(Rejection(order, RejectReason.NOT_IN_UNIVERSE, "no price history yet"))
            continue
        prev_close, _ = prev
        est_price = raw_dec(prev_close)

        if pit_safe:
            fill_price = prev_close
        else:
            if not store.has_bar(order.ticker, fill_day):
                rejections.append(
                    Rejection(order, RejectReason.NOT_IN_UNIVERSE, "no bar on the fill day (suspended)")
                )
                continue
            bar = store.bar(order.ticker, fill_day)
            limit_pct = store.boards[order.ticker].limit_pct
            up = prev_close * (1.0 + limit_pct)
            down = prev_close * (1.0 - limit_pct)
            one_sided = bar.open == bar.high == bar.low
            if one_sided and (bar.open >= up or bar.open <= down):
                rejections.append(
                    Rejection(order, RejectReason.UNFILLABLE_ONE_SIDED,
                              "one-sided session pinned at the price limit")
                )
                continue
            if order.side is Side.BUY and bar.open >= up:
                rejections.append(
                    Rejection(order, RejectReason.LIMIT_UP_BUY,
                              f"next open {bar.open} at or above limit-up {up:.4f}")
                )
                continue
            if order.side is Side.SELL and bar.open <= down:
                rejections.append(
                    Rejection(order, RejectReason.LIMIT_DOWN_SELL,
                              f"next open {bar.open} at or below limit-down {down:.4f}")
                )
                continue
            fill_price = bar.open

        shares = _resolve_shares(order, account, nav_est, est_price, rejections)
        if shares is None:
            continue
        price_dec = raw_dec(fill_price)

        if order.side is Side.SELL:
            pos = account.positions.get(order.ticker)
            if pos is None or pos.shares_total == 0:
                rejections.append(Rejection(order, RejectReason.INSUFFICIENT_SHARES, "no holding"))
                continue
            if pos.shares_available == 0:
                rejections.append(
                    Rejection(order, RejectReason.T1_LOCKED, "all shares bought today; sellable tomorrow")
                )
                continue
            note = ""
            if shares > pos.shares_available:
                shares = pos.shares_available
                note = "clipped to sellable shares"
            notional = (price_dec * shares).quantize(CENT, rounding=ROUND_HALF_UP)
            cost = _fee(notional, params.sell_rate, params)
            account.cash += notional - cost
            pos.shares_total -= shares
            pos.shares_available -= shares
            if pos.shares_total == 0:
                del account.positions[order.ticker]
            fills.append(Fill(order.ticker, Side.SELL, shares, fill_price, notional, cost, fill_day, note, order))
            continue

        # BUY: truncate to the largest round lot that keeps the cash buffer
        spendable = account.cash - buffer
        if spendable <= 0:
            rejections.append(Rejection(order, RejectReason.INSUFFICIENT_CASH, "cash buffer exhausted"))
            continue

        def total_cost(n: int) -> Decimal:
            notional = (price_dec * n).quantize(CENT, rounding=ROUND_HALF_UP)
            return notional + _fee(notional, params.buy_rate, params)

        note = ""
        if total_cost(shares) > spendable:
            per_lot = price_dec * LOT * (Decimal(1) + params.buy_rate)
            n = int((spendable / per_lot).to_integral_value(rounding=ROUND_DOWN)) * LOT
            n = min(n, shares)
            while n > 0 and total_cost(n) > spendable:
                n -= LOT
            if n <= 0:
                rejections.append(
                    Rejection(order, RejectReason.INSUFFICIENT_CASH,
                              "not affordable at one round lot with the cash buffer")
                )
                continue
            shares = n
            note = "partially filled down to affordable lots"

        notional = (price_dec * shares).quantize(CENT, rounding=ROUND_HALF_UP)
        cost = _fee(notional, params.buy_rate, params)
        account.cash -= notional + cost
        pos = account.positions.get(order.ticker)
        if pos is None:
            pos = Position()
            account.positions[order.ticker] = pos
        new_total = pos.shares_total + shares
        basis = pos.avg_cost * pos.shares_total + notional
        pos.avg_cost = (basis / new_total).quantize(Decimal("0.0001"), rounding=ROUND_HALF_UP)
        pos.shares_total = new_total
        fills.append(Fill(order.ticker, Side.BUY, shares, fill_price, notional, cost, fill_day, note, order))

    return fills, rejections


def score_portfolio_step(
    scores: dict[str, float],
    account: Account,
    day: int,
    store: MarketStore,
    k: int,
    threshold: float = 0.06,
    params: ExecParams | None = None,
) -> list[Order]:
    """Equal-weight top-k book from a score map, with cost-aware suppression.

    Emits SELL orders for names leaving the book, then BUY/SELL adjustments
    for members, skipping any trade whose weight change is below
    ``threshold / k``. SELLs are listed before BUYs. Targets split the
    investable budget (NAV minus the executor's cash buffer) so a full book
    is actually fillable; the per-lot rounding residue then stays inside the
    suppression threshold instead of churning.
    """
    params = params or ExecParams()
    universe = [t for t in store.universe(day).members if t in scores]
    if k > len(universe):
        raise ValueError(f"k={k} exceeds scored universe of {len(universe)}")
    ranked = sorted(universe, key=lambda t: (-scores[t], t))
    target = ranked[:k]
    target_set = set(target)
    target_w = (1.0 - float(params.cash_buffer_frac)) / k
    min_change = threshold * (1.0 / k)

    price_day = day - 1
    nav = mark_value(account, price_day, store)
    weights: dict[str, float] = {}
    for t, pos in account.positions.items():
        found = store.close_at_or_before(t, price_day)
        if found is None:
            continue
        weights[t] = float((raw_dec(found[0]) * pos.shares_total) / nav) if nav > 0 else 0.0

    sells: list[Order] = []
    buys: list[Order] = []
    for t in sorted(account.positions):
        if t in target_set:
            continue
        w = weights.get(t, 0.0)
        if w < min_change:
            continue
        sells.append(Order(t, Side.SELL, target_weight=0.0, confidence=0.5,
                           reason=f"dropped from the top-{k} score book"))
    for rank, t in enumerate(target, start=1):
        w = weights.get(t, 0.0)
        delta = target_w - w
        if abs(delta) < min_change:
            continue
        side = Side.BUY if delta > 0 else Side.SELL
        order = Order(t, side, target_weight=target_w, confidence=0.5,
                      reason=f"score rank {rank} of {k}; rebalance to equal weight")
        (buys if side is Side.BUY else sells).append(order)
    return sells + buys
