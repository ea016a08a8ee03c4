"""The ten-dimensional evaluation panel plus calibration diagnostics.

All fields are pure functions of a completed episode and an aligned
benchmark NAV series. Ratio metrics that would divide by zero come back as
None (serialized null), never NaN or infinity.

Conventions pinned here so the brute-force test oracle can mirror them:

- daily returns are NAV ratios over consecutive marks; stds use ddof=1
- Sharpe and IR annualize with sqrt(252), zero risk-free rate
- turnover sums |weight change| per step (NAV-relative weights at fill
  prices, pre-trade vs post-trade) and annualizes by 252/steps
- HHI normalizes over invested value only (single position = 1.0); an
  empty book contributes 0
- an order is "correct" when its side-signed next-open-to-next-open return
  is strictly positive; orders without an outcome are excluded
- ECE uses 10 equal-width confidence bins over [0, 1]
"""
from __future__ import annotations

import json
from dataclasses import asdict, dataclass

import numpy as np

TRADING_DAYS = 252
ECE_BINS = 10


@dataclass
class MetricPanel:
    total_return: float
    sharpe: float | None
    max_drawdown: float
    information_ratio: float | None
    annualized_turnover: float
    hhi: float
    cash_ratio: float
    abstention_rate: float
    parse_failure_rate: float
    ece: float | None
    # diagnostics, not part of the headline ten
    tool_validity_rate: float | None
    brier: float | None
    n_steps: int
    n_orders: int

    def to_json(self) -> dict:
        return asdict(self)

    def csv_row(self) -> dict:
        return {k: ("" if v is None else v) for k, v in asdict(self).items()}


def _daily_returns(nav: list[float]) -> np.ndarray:
    arr = np.asarray(nav, dtype=np.float64)
    return arr[1:] / arr[:-1] - 1.0


def sharpe_ratio(nav: list[float]) -> float | None:
    rets = _daily_returns(nav)
    if len(rets) < 2:
        return None
    sd = float(np.std(rets, ddof=1))
    if sd == 0.0:
        return None
    return float(np.mean(rets)) / sd * float(np.sqrt(TRADING_DAYS))


def max_drawdown(nav: list[float]) -> float:
    arr = np.asarray(nav, dtype=np.float64)
    peaks = np.maximum.accumulate(arr)
    return float(np.min(arr / peaks - 1.0))


def information_ratio(nav: list[float], benchmark: list[float]) -> float | None:
    if len(nav) != len(benchmark):
        raise ValueError("portfolio and benchmark series must align")
    excess = _daily_returns(nav) - _daily_returns(benchmark)
    if len(excess) < 2:
        return None
    sd = float(np.std(excess, ddof=1))
    if sd == 0.0:
        return None
    return float(np.mean(excess)) * TRADING_DAYS / (sd * float(np.sqrt(TRADING_DAYS)))


def step_turnover(weights_pre: dict, weights_post: dict) -> float:
    keys = set(weights_pre) | set(weights_post)
    return float(sum(abs(weights_post.get(k, 0.0) - weights_pre.get(k, 0.0)) for k in keys))


def step_hhi(weights_post: dict) -> float:
    total = sum(weights_post.values())
    if total <= 0:
        return 0.0
    return float(sum((w / total) ** 2 for w in weights_post.values()))


def order_outcome(side: str, next_ret: float) -> int:
    """1 when the side-signed next-period return is strictly positive."""
    signed = next_ret if side == "BUY" else -next_ret
    return 1 if signed > 0 else 0


def expected_calibration_error(confidences: list[float], outcomes: list[int]) -> float | None:
    if not confidences:
        return None
    conf = np.asarray(confidences, dtype=np.float64)
    out = np.asarray(outcomes, dtype=np.float64)
    bins = np.minimum((conf * ECE_BINS).astype(int), ECE_BINS - 1)
    n = len(conf)
    ece = 0.0
    for b in range(ECE_BINS):
        m = bins == b
        nb = int(np.sum(m))
        if nb == 0:
            continue
        ece += (nb / n) * abs(float(np.mean(conf[m])) - float(np.mean(out[m])))
    return float(ece)


def brier_score(confidences: list[float], outcomes: list[int]) -> float | None:
    if not confidences:
        return None
    conf = np.asarray(confidences, dtype=np.float64)
    out = np.asarray(outcomes, dtype=np.float64)
    return float(np.mean((conf - out) ** 2))


def turnover_series(records) -> list[float]:
    return [step_turnover(_get(r, "weights_pre"), _get(r, "weights_post")) for r in records]


def _get(record, field):
    if isinstance(record, dict):
        return record[field]
    return getattr(record, field)


def compute_panel(episode, benchmark_nav: list[float] | None = None) -> MetricPanel:
    """Compute the panel from an EpisodeResult or a loaded episode dict."""
    if isinstance(episode, dict):
        nav = episode["nav"]
        records = episode["records"]
        bench = benchmark_nav if benchmark_nav is not None else episode["benchmark"]
    else:
        nav = episode.nav_values
        records = episode.records
        bench = benchmark_nav if benchmark_nav is not None else episode.benchmark_values

    if not nav:
        raise ValueError("episode has no NAV marks")
    n_steps = len(records)

    tos = turnover_series(records)
    turnover = float(sum(tos)) * TRADING_DAYS / n_steps if n_steps else 0.0
    hhi = float(np.mean([step_hhi(_get(r, "weights_post")) for r in records])) if n_steps else 0.0
    cash_ratio = float(np.mean([
        _get(r, "mark_cash") / _get(r, "mark_nav") if _get(r, "mark_nav") > 0 else 1.0
        for r in records
    ])) if n_steps else 1.0

    abstentions = 0
    parse_failures = 0
    confidences: list[float] = []
    outcomes: list[int] = []
    tool_total = 0
    tool_ok = 0
    n_orders = 0
    for r in records:
        action = _get(r, "action")
        fallback = _get(r, "fallback")
        if fallback or (action is not None and not action["orders"]):
            abstentions += 1
        if _get(r, "parse_failure"):
            parse_failures += 1
        for c in _get(r, "tool_calls"):
            tool_total += 1
            tool_ok += 1 if c["ok"] else 0
        for o in _get(r, "calib"):
            n_orders += 1
            if o["next_ret"] is None:
                continue
            confidences.append(float(o["confidence"]))
            outcomes.append(order_outcome(o["side"], float(o["next_ret"])))

    return MetricPanel(
        total_return=float(nav[-1] / nav[0] - 1.0),
        sharpe=sharpe_ratio(nav),
        max_drawdown=max_drawdown(nav),
        information_ratio=information_ratio(nav, bench),
        annualized_turnover=turnover,
        hhi=hhi,
        cash_ratio=cash_ratio,
        abstention_rate=abstentions / n_steps if n_steps else 0.0,
        parse_failure_rate=parse_failures / n_steps if n_steps else 0.0,
        ece=expected_calibration_error(confidences, outcomes),
        tool_validity_rate=(tool_ok / tool_total) if tool_total else None,
        brier=brier_score(confidences, outcomes),
        n_steps=n_steps,
        n_orders=n_orders,
    )


def write_panel(panel: MetricPanel, path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(panel.to_json(), fh, indent=2, sort_keys=True)
        fh.write("\n")
