"""Raw style-factor exposures for the cross-sectional attribution model.

Nine price/volume factors, each computed from bars strictly before the as-of
day. Values here are raw; winsorization and cross-sectional standardization
happen in the attribution preprocessing step. A factor without enough history
is None for that name (never silently zero).

Formula conventions (window lengths count the ticker's own bars, newest bar
is the day before as-of):

- MOM_12_1:  close[t-21] / close[t-252] - 1
- RV_60:     sample std of the last 60 daily close returns
- ILLIQ:     mean over the last 20 bars of |ret_1d| / (amount / 1e8),
             zero-amount days excluded
- REV_ON:    mean over the last 20 bars of open / prev_close - 1
- MOM_ID:    mean over the last 20 bars of close / open - 1
- SKEW:      negated Fisher-Pearson skewness of the last 60 daily returns
             (stored value rises with more negative return skew)
- CORR_PV:   Pearson correlation of (daily return, amount) over 20 bars
- HIGH_52W:  close[t-1] / max(close over the last 252 bars)
- CV_VOL:    std / mean of amount over the last 20 bars
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

STYLE_FACTORS = (
    "MOM_12_1",
    "RV_60",
    "ILLIQ",
    "REV_ON",
    "MOM_ID",
    "SKEW",
    "CORR_PV",
    "HIGH_52W",
    "CV_VOL",
)


@dataclass(frozen=True)
class StyleExposureRow:
    ticker: str
    asof: int
    values: dict  # factor name -> float | None


def missing_style_row(ticker: str, asof: int) -> StyleExposureRow:
    return StyleExposureRow(ticker, asof, {f: None for f in STYLE_FACTORS})


def _skewness(x: np.ndarray) -> float | None:
    m = x.mean()
    d = x - m
    m2 = np.mean(d * d)
    if m2 <= 0:
        return None
    m3 = np.mean(d * d * d)
    return float(m3 / m2 ** 1.5)


def _pearson(a: np.ndarray, b: np.ndarray) -> float | None:
    if np.std(a) == 0 or np.std(b) == 0:
        return None
    return float(np.corrcoef(a, b)[0, 1])


def compute_style_exposures(store, asof_idx: int, tickers) -> list[StyleExposureRow]:
    rows = []
    for t in tickers:
        if not store.has_ticker(t):
            rows.append(missing_style_row(t, asof_idx))
            continue
        s = store.series(t)
        n = s.pos_before(asof_idx)
        closes = s.close[:n]
        opens = s.open[:n]
        amounts = s.amount[:n]
        v: dict = {f: None for f in STYLE_FACTORS}

        if n >= 252:
            v["MOM_12_1"] = float(closes[-21] / closes[-252] - 1.0)
            v["HIGH_52W"] = float(closes[-1] / np.max(closes[-252:]))
        if n >= 61:
            r60 = np.diff(closes[-61:]) / closes[-61:-1]
            v["RV_60"] = float(np.std(r60, ddof=1))
            sk = _skewness(r60)
            v["SKEW"] = None if sk is None else -sk
        if n >= 21:
            r20 = np.diff(closes[-21:]) / closes[-21:-1]
            amt20 = amounts[-20:]
            nonzero = amt20 > 0
            if np.any(nonzero):
                v["ILLIQ"] = float(np.mean(np.abs(r20[nonzero]) / (amt20[nonzero] / 1e8)))
            v["REV_ON"] = float(np.mean(opens[-20:] / closes[-21:-1] - 1.0))
            v["CORR_PV"] = _pearson(r20, amt20)
        if n >= 20:
            w_open = opens[-20:]
            w_close = closes[-20:]
            v["MOM_ID"] = float(np.mean(w_close / w_open - 1.0))
            amt = amounts[-20:]
            mean_amt = float(np.mean(amt))
            if mean_amt > 0:
                v["CV_VOL"] = float(np.std(amt, ddof=1) / mean_amt)
        # constant-price degenerate case: SKEW formula already yields None
        rows.append(StyleExposureRow(t, asof_idx, v))
    return rows
