"""De-anonymization probe: generation, scoring, and random baselines.

A probe is the exact masked view a blinded agent would get for one
(stock, day) pair: market context, a candidate screen, and the target's
snapshot, each rendered through a fresh alias map. Gold labels live in a
separate file so probe payloads can be handed to any attacker, human or
model. Scoring counts ticker top-1/top-5, board accuracy, date proximity in
trading days, and the strict joint rate, each with a Wilson 95% interval.
"""
from __future__ import annotations

import datetime as dt
import json
import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .data.market import Board, MarketStore
from .execution import Account
from .masking import AliasMap, MaskLevel, leak_scan, mask
from .tools import ToolContext, dispatch

WILSON_Z = 1.959964

#: tool arguments used when producing probe payloads
PROBE_SCREEN_TOP_K = 15
PROBE_SNAPSHOT_LOOKBACK = 20

#: minimum bar history before a day becomes probe-eligible
_MIN_HISTORY = 21


@dataclass(frozen=True)
class Probe:
    probe_id: str
    payload: dict           # masked; safe to publish
    gold_ticker: str
    gold_date: str          # ISO
    gold_board: str
    stratum: tuple[int, int]  # (window index, board index)


@dataclass
class AttackerAnswer:
    probe_id: str
    ticker_top5: list[str]
    date_guess: str | None
    board_guess: str | None


@dataclass
class RateCI:
    rate: float
    lo: float
    hi: float
    n: int

    def to_json(self) -> dict:
        return {"rate": self.rate, "ci95": [self.lo, self.hi], "n": self.n}


@dataclass
class ProbeScore:
    tk1: RateCI
    tk5: RateCI
    board_acc: RateCI
    date_within_7: RateCI
    date_within_30: RateCI
    date_within_90: RateCI
    joint: RateCI
    n_responses: int
    n_probes: int

    def to_json(self) -> dict:
        return {
            "tk1": self.tk1.to_json(),
            "tk5": self.tk5.to_json(),
            "board_acc": self.board_acc.to_json(),
            "date_within_7": self.date_within_7.to_json(),
            "date_within_30": self.date_within_30.to_json(),
            "date_within_90": self.date_within_90.to_json(),
            "joint": self.joint.to_json(),
            "n_responses": self.n_responses,
            "n_probes": self.n_probes,
        }


def wilson_interval(successes: int, n: int, z: float = WILSON_Z) -> tuple[float, float]:
    """Wilson 95% score interval for a binomial proportion."""
    if n == 0:
        return (0.0, 1.0)
    p = successes / n
    denom = 1.0 + z * z / n
    center = (p + z * z / (2 * n)) / denom
    half = z * math.sqrt(p * (1.0 - p) / n + z * z / (4 * n * n)) / denom
    return (max(0.0, center - half), min(1.0, center + half))


def _rate(successes: int, n: int) -> RateCI:
    lo, hi = wilson_interval(successes, n)
    return RateCI(successes / n if n else 0.0, lo, hi, n)


def _eligible_days(store: MarketStore, ticker: str) -> list[int]:
    s = store.series(ticker)
    days = [int(d) for d in s.day_idx]
    # need history before, and one day after so the probe day is a valid decision day
    return [d for d in days if s.pos_before(d) >= _MIN_HISTORY and d + 1 < len(store.calendar)]


def default_strata(store: MarketStore, n_windows: int = 5) -> list[tuple[int, int]]:
    """Split the calendar span into n equal windows, crossed with the four boards."""
    n = len(store.calendar)
    edges = [round(i * n / n_windows) for i in range(n_windows + 1)]
    return [(lo, hi) for lo, hi in zip(edges, edges[1:])]


def generate_probes(
    store: MarketStore,
    n: int,
    seed: int,
    n_windows: int = 5,
    level: MaskLevel = MaskLevel.BLINDED,
) -> list[Probe]:
    """Sample (stock, day) probes stratified over time windows x boards.

    `n` is spread as evenly as possible over the strata grid; a stratum with
    no eligible pair is a hard error naming it. Each probe gets a fresh
    alias map derived from the master seed, and every payload must pass the
    leak scanner before it is returned.
    """
    windows = default_strata(store, n_windows)
    boards = [Board.MAIN, Board.CHINEXT, Board.STAR, Board.BSE]
    by_board: dict[Board, list[str]] = {b: [] for b in boards}
    for t in store.tickers:
        by_board[store.boards[t].board].append(t)

    cells = [(wi, bi) for wi in range(len(windows)) for bi in range(len(boards))]
    base = n // len(cells)
    extra = n % len(cells)
    quotas = {cell: base + (1 if i < extra else 0) for i, cell in enumerate(cells)}

    rng = np.random.default_rng(seed)
    probes: list[Probe] = []
    count = 0
    for (wi, bi) in cells:
        quota = quotas[(wi, bi)]
        if quota == 0:
            continue
        lo, hi = windows[wi]
        board = boards[bi]
        pool = []
        for t in by_board[board]:
            for d in _eligible_days(store, t):
                if lo <= d < hi:
                    pool.append((t, d))
        if not pool:
            raise ValueError(f"stratum (window {wi}, board {board.value}) has no eligible (stock, day) pair")
        take = min(quota, len(pool))
        idx = rng.choice(len(pool), size=take, replace=False)
        for j in sorted(int(i) for i in idx):
            t, d = pool[j]
            probes.append(_build_probe(store, t, d, (wi, bi), seed * 100_003 + count, level))
            count += 1
    return probes


def _build_probe(store, ticker, day, stratum, probe_seed, level) -> Probe:
    amap = AliasMap(store.tickers, level, seed=probe_seed, anchor_index=day, calendar=store.calendar)
    account = Account.with_cash(1_000_000)
    from .harness.config import merge_config

    ctx = ToolContext(store, account, day, amap, merge_config(None))
    parts = {}
    r = dispatch("get_market_context", {}, ctx)
    parts["market_context"] = mask(r.payload, amap)
    r = dispatch("screen_candidates", {"sort_by": "ret_20d", "top_k": PROBE_SCREEN_TOP_K}, ctx)
    parts["screen"] = mask(r.payload, amap)
    r = dispatch("get_stock_snapshot",
                 {"stock_id": amap.render_ticker(ticker), "lookback": PROBE_SNAPSHOT_LOOKBACK}, ctx)
    parts["target_snapshot"] = mask(r.payload, amap)
    payload = {
        "probe_id": f"probe_{probe_seed}",
        "target": parts["target_snapshot"]["stock_id"],
        "views": parts,
    }
    leaks = leak_scan(payload, amap)
    if leaks:
        raise RuntimeError(f"probe payload leaked: {leaks[:3]}")
    return Probe(
        probe_id=payload["probe_id"],
        payload=payload,
        gold_ticker=ticker,
        gold_date=store.calendar.date(day).isoformat(),
        gold_board=store.boards[ticker].board.value,
        stratum=stratum,
    )


def write_probe_set(probes: list[Probe], out_dir) -> None:
    """probes/*.json hold payloads only; gold.json is the separate answer key."""
    out = Path(out_dir)
    (out / "probes").mkdir(parents=True, exist_ok=True)
    gold = {}
    for p in probes:
        with open(out / "probes" / f"{p.probe_id}.json", "w", encoding="utf-8") as fh:
            json.dump(p.payload, fh, ensure_ascii=False, indent=2, sort_keys=True)
            fh.write("\n")
        gold[p.probe_id] = {
            "ticker": p.gold_ticker,
            "date": p.gold_date,
            "board": p.gold_board,
            "stratum": list(p.stratum),
        }
    with open(out / "gold.json", "w", encoding="utf-8") as fh:
        json.dump(gold, fh, ensure_ascii=False, indent=2, sort_keys=True)
        fh.write("\n")


def load_gold(path) -> dict:
    with open(path, "r", encoding="utf-8") as fh:
        return json.load(fh)


def load_answers(path) -> list[AttackerAnswer]:
    """answers.jsonl: one JSON object per line; malformed lines are skipped."""
    answers = []
    with open(path, "r", encoding="utf-8") as fh:
        for line in fh:
            line = line.strip()
            if not line:
                continue
            try:
                obj = json.loads(line)
            except json.JSONDecodeError:
                continue
            if not isinstance(obj, dict) or "probe_id" not in obj:
                continue
            top5 = obj.get("ticker_top5") or []
            if not isinstance(top5, list):
                continue
            answers.append(AttackerAnswer(
                probe_id=str(obj["probe_id"]),
                ticker_top5=[str(x) for x in top5][:5],
                date_guess=obj.get("date_guess"),
                board_guess=obj.get("board_guess"),
            ))
    return answers


def score_answers(gold: dict, answers: list[AttackerAnswer], store: MarketStore) -> ProbeScore:
    """Score an attacker's answer file against the gold labels.

    Rates are over successful responses only: probes without a parseable
    answer drop out of every denominator. Date distance counts trading days
    through the store calendar. Joint success = gold ticker in the top-5
    AND the date within 7 trading days.
    """
    tk1 = tk5 = board_ok = d7 = d30 = d90 = joint = 0
    n = 0
    for a in answers:
        if a.probe_id not in gold:
            raise KeyError(f"answer references unknown probe id {a.probe_id!r}")
        g = gold[a.probe_id]
        n += 1
        in_top5 = g["ticker"] in a.ticker_top5
        if a.ticker_top5 and a.ticker_top5[0] == g["ticker"]:
            tk1 += 1
        if in_top5:
            tk5 += 1
        if a.board_guess == g["board"]:
            board_ok += 1
        within7 = False
        if a.date_guess:
            try:
                guess = dt.date.fromisoformat(a.date_guess)
            except ValueError:
                guess = None
            if guess is not None:
                dist = store.calendar.trading_day_distance(guess, dt.date.fromisoformat(g["date"]))
                if dist <= 7:
                    d7 += 1
                    within7 = True
                if dist <= 30:
                    d30 += 1
                if dist <= 90:
                    d90 += 1
        if in_top5 and within7:
            joint += 1
    return ProbeScore(
        tk1=_rate(tk1, n),
        tk5=_rate(tk5, n),
        board_acc=_rate(board_ok, n),
        date_within_7=_rate(d7, n),
        date_within_30=_rate(d30, n),
        date_within_90=_rate(d90, n),
        joint=_rate(joint, n),
        n_responses=n,
        n_probes=len(gold),
    )


def uniform_attacker_answers(gold: dict, store: MarketStore, seed: int) -> list[AttackerAnswer]:
    """Scripted attacker guessing uniformly over the universe, span and boards."""
    rng = np.random.default_rng(seed)
    tickers = list(store.tickers)
    boards = [b.value for b in Board]
    n_days = len(store.calendar)
    answers = []
    for pid in sorted(gold):
        top5_idx = rng.choice(len(tickers), size=min(5, len(tickers)), replace=False)
        day = int(rng.integers(0, n_days))
        answers.append(AttackerAnswer(
            probe_id=pid,
            ticker_top5=[tickers[int(i)] for i in top5_idx],
            date_guess=store.calendar.date(day).isoformat(),
            board_guess=boards[int(rng.integers(0, len(boards)))],
        ))
    return answers


def cheating_attacker_answers(gold: dict) -> list[AttackerAnswer]:
    """Attacker handed the answer key; proves the scorer, not the mask."""
    return [
        AttackerAnswer(
            probe_id=pid,
            ticker_top5=[g["ticker"]],
            date_guess=g["date"],
            board_guess=g["board"],
        )
        for pid, g in sorted(gold.items())
    ]


def random_baseline(store: MarketStore, n_probes: int, n_trials: int, seed: int) -> ProbeScore:
    """Monte-Carlo expectation of the uniform attacker, as a comparison row.

    Simulates `n_trials` independent uniform answer sets against freshly
    sampled gold days and pools the outcomes; the pooled rates estimate the
    per-cell baseline (tk5 near 5/N, board near 1/4, date_within_7 near the
    15-trading-day band over the span).
    """
    rng = np.random.default_rng(seed)
    n_days = len(store.calendar)
    n_tickers = len(store.tickers)
    tk1 = tk5 = board_ok = d7 = d30 = d90 = joint = 0
    n = n_probes * n_trials
    for _ in range(n_trials):
        gold_days = rng.integers(0, n_days, size=n_probes)
        gold_tickers = rng.integers(0, n_tickers, size=n_probes)
        for gd, gt in zip(gold_days, gold_tickers):
            guess_idx = rng.choice(n_tickers, size=min(5, n_tickers), replace=False)
            if int(guess_idx[0]) == int(gt):
                tk1 += 1
            in5 = int(gt) in {int(i) for i in guess_idx}
            if in5:
                tk5 += 1
            if int(rng.integers(0, 4)) == int(rng.integers(0, 4)):
                board_ok += 1
            dist = abs(int(rng.integers(0, n_days)) - int(gd))
            within7 = dist <= 7
            if within7:
                d7 += 1
            if dist <= 30:
                d30 += 1
            if dist <= 90:
                d90 += 1
            if in5 and within7:
                joint += 1
    return ProbeScore(
        tk1=_rate(tk1, n),
        tk5=_rate(tk5, n),
        board_acc=_rate(board_ok, n),
        date_within_7=_rate(d7, n),
        date_within_30=_rate(d30, n),
        date_within_90=_rate(d90, n),
        joint=_rate(joint, n),
        n_responses=n,
        n_probes=n_probes,
    )
