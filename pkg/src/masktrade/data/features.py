"""Point-in-time prompt/tool features.

Every value for an as-of day is computed from bars strictly before that day,
so a feature row can be reproduced after deleting all bars at or past the
as-of date. Rows with fewer than 21 prior bars are flagged partial; fields
that cannot be computed are None.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

#: Fields that tools may sort/compare on.
FEATURE_FIELDS = ("prev_close", "ret_1d", "ret_5d", "ret_20d", "vol_20d", "drawdown_20d")


@dataclass(frozen=True)
class FeatureRow:
    ticker: str
    asof: int
    prev_close: float | None
    ret_1d: float | None
    ret_5d: float | None
    ret_20d: float | None
    vol_20d: float | None
    drawdown_20d: float | None
    partial: bool
    missing: bool = False

    def value(self, field: str):
        if field not in FEATURE_FIELDS:
            raise KeyError(f"unknown feature field {field!r}")
        return getattr(self, field)


def missing_feature_row(ticker: str, asof: int) -> FeatureRow:
    return FeatureRow(ticker, asof, None, None, None, None, None, None, partial=True, missing=True)


def _ret(closes: np.ndarray, k: int) -> float | None:
    # closes[-1] is close[t-1]; close[t-1-k] is closes[-1-k]
    if len(closes) < k + 1:
        return None
    return float(closes[-1] / closes[-1 - k] - 1.0)


def compute_features(store, asof_idx: int, tickers) -> list[FeatureRow]:
    rows = []
    for t in tickers:
        if not store.has_ticker(t):
            rows.append(missing_feature_row(t, asof_idx))
            continue
        s = store.series(t)
        n = s.pos_before(asof_idx)
        if n == 0:
            rows.append(missing_feature_row(t, asof_idx))
            continue
        closes = s.close[:n]
        partial = n < 21
        prev_close = float(closes[-1])
        vol_20d = None
        drawdown_20d = None
        if n >= 21:
            rets = np.diff(closes[-21:]) / closes[-21:-1]
            vol_20d = float(np.std(rets, ddof=1))
        if n >= 20:
            w = closes[-20:]
            drawdown_20d = float(np.min(w / np.maximum.accumulate(w) - 1.0))
        rows.append(
            FeatureRow(
                ticker=t,
                asof=asof_idx,
                prev_close=prev_close,
                ret_1d=_ret(closes, 1),
                ret_5d=_ret(closes, 5),
                ret_20d=_ret(closes, 20),
                vol_20d=vol_20d,
                drawdown_20d=drawdown_20d,
                partial=partial,
            )
        )
    return rows
