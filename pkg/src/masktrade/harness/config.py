"""Harness configuration.

One flat JSON object; every key has a documented default and unknown keys
are rejected so config typos fail loudly. LLM-call keys (temperature,
max_tokens, timeout_s, inter_call_gap_s) are forwarded verbatim to external
agent adapters; the built-in scripted agents ignore them.
"""
from __future__ import annotations

import json

DEFAULT_CONFIG: dict = {
    # execution
    "benchmark": "CSI300",
    "initial_cash": 1_000_000,
    "buy_cost_bps": 5,
    "sell_cost_bps": 15,
    "min_cost_cny": 5,
    "deal_price": "next_open",
    "t_plus_one": True,
    "long_only": True,
    "cash_buffer_frac": 0.01,
    # agent loop
    "max_candidates_per_step": 100,
    "max_tool_calls_per_step": 99,
    "max_positions": 300,
    "max_single_weight": 1.00,
    "schema_retries": 2,
    "retry_with_feedback": True,
    "min_reason_length": 10,
    "fallback_action": "hold",
    "lenient_json": False,
    "fixed_candidate_per_factor": 10,
    "universe_preview_limit": 50,
    # LLM call passthrough
    "temperature": 0.0,
    "max_tokens": 32_768,
    "timeout_s": 600,
    "inter_call_gap_s": 3,
    # runner
    "workers": 1,
}

CONFIG_HELP: dict = {
    "benchmark": "label of the benchmark series in reports and prompts",
    "initial_cash": "starting cash in CNY",
    "buy_cost_bps": "buy-side cost in basis points of notional",
    "sell_cost_bps": "sell-side cost in basis points of notional",
    "min_cost_cny": "minimum cost per order in CNY",
    "deal_price": "fill price convention (next_open is the only supported value)",
    "t_plus_one": "shares bought today become sellable the next trading day",
    "long_only": "short positions are rejected",
    "cash_buffer_frac": "fraction of NAV kept as a cash buffer when sizing buys",
    "max_candidates_per_step": "upper bound on screen_candidates top_k",
    "max_tool_calls_per_step": "research-phase tool budget per step",
    "max_positions": "cap on distinct names in the book",
    "max_single_weight": "cap on a single order's target_weight",
    "schema_retries": "extra submission attempts after the first invalid one",
    "retry_with_feedback": "quote violation sentences back to the agent on retry",
    "min_reason_length": "minimum characters in each order's reason",
    "fallback_action": "terminal outcome when all retries fail (hold = no-trade)",
    "lenient_json": "strip markdown code fences around submissions (logged)",
    "fixed_candidate_per_factor": "per-factor top-n in the fixed-candidate pool union",
    "universe_preview_limit": "identifiers shown inline in the prompt universe preview",
    "temperature": "forwarded to external agent adapters",
    "max_tokens": "forwarded to external agent adapters",
    "timeout_s": "per-response timeout for external agents in seconds",
    "inter_call_gap_s": "politeness gap forwarded to external agent adapters",
    "workers": "process pool size for grid runs",
}


def merge_config(overrides: dict | None) -> dict:
    cfg = dict(DEFAULT_CONFIG)
    if overrides:
        unknown = set(overrides) - set(DEFAULT_CONFIG)
        if unknown:
            raise ValueError(f"unknown config keys: {sorted(unknown)}")
        cfg.update(overrides)
    return cfg


def load_config(path) -> dict:
    with open(path, "r", encoding="utf-8") as fh:
        return merge_config(json.load(fh))


def config_help_text() -> str:
    lines = ["configuration keys (JSON file, flat object):"]
    for key, default in DEFAULT_CONFIG.items():
        lines.append(f"  {key} (default {default!r}): {CONFIG_HELP[key]}")
    return "\n".join(lines)
