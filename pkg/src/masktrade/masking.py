"""Four-level identifier masking and the leak scanner.

Masking is field-driven: payloads are built with the tagged leaves
:class:`TickerRef` and :class:`DateRef`, and :func:`mask` renders each tag
according to the alias map's level. Regex rewriting is never used for
masking because a price of 600519.0 is indistinguishable from a ticker at
the string level; regexes only appear in the *scanner*, where conservatism
is a feature.

Date tokens are relative trading-day offsets from the episode anchor
(``day_+12`` is twelve trading days after the first day of the evaluation
window), so alias arithmetic never touches real calendar dates.
"""
from __future__ import annotations

import json
import random
import re
from dataclasses import dataclass
from enum import Enum

from .data.market import TradingCalendar


class MaskLevel(Enum):
    BRIGHT = "bright"
    STOCK_BLIND = "stock_blind"
    DATE_BLIND = "date_blind"
    BLINDED = "blinded"

    @property
    def masks_tickers(self) -> bool:
        return self in (MaskLevel.STOCK_BLIND, MaskLevel.BLINDED)

    @property
    def masks_dates(self) -> bool:
        return self in (MaskLevel.DATE_BLIND, MaskLevel.BLINDED)


@dataclass(frozen=True)
class TickerRef:
    """Tagged ticker leaf; holds the real exchange-prefixed identifier."""

    value: str


@dataclass(frozen=True)
class DateRef:
    """Tagged trading-day leaf; holds a calendar index."""

    index: int


class MaskingError(ValueError):
    pass


class UnknownAliasError(MaskingError):
    """The agent referenced an alias that is not in the episode map."""


ALIAS_RE = re.compile(r"^asset_(\d{4})$")
DAY_TOKEN_RE = re.compile(r"^day_([+-]\d+)$")

# Scanner patterns. Digit runs adjacent to a decimal point are part of a
# number and are never ticker candidates; standalone 6-digit runs are.
_TICKER_STRING_RE = re.compile(r"(?<![A-Za-z0-9])(?:SH|SZ|BJ)(\d{6})(?!\d)")
_ISO_DATE_RE = re.compile(r"(?<![\d-])(\d{4}-\d{2}-\d{2})(?![\d-])")
_NUMBER_RUN_RE = re.compile(r"[\d.]+")


class AliasMap:
    """Per-episode bijection between tickers and ``asset_NNNN`` aliases.

    The alias numbering is a seeded permutation of ``range(n_tickers)``, so
    identical seeds reproduce identical maps and distinct seeds reshuffle.
    Immutable after construction; mask/unmask are pure functions of it.
    """

    def __init__(
        self,
        tickers,
        level: MaskLevel,
        seed: int,
        anchor_index: int,
        calendar: TradingCalendar,
    ):
        tickers = sorted(tickers)
        if len(tickers) > 10_000:
            raise MaskingError("alias space is 4 digits; universes above 10,000 are rejected")
        self.level = level
        self.seed = seed
        self.anchor_index = anchor_index
        self.calendar = calendar
        order = list(range(len(tickers)))
        random.Random(seed).shuffle(order)
        self.ticker_to_alias = {t: f"asset_{n:04d}" for t, n in zip(tickers, order)}
        self.alias_to_ticker = {a: t for t, a in self.ticker_to_alias.items()}
        self._numeric_parts = {t[-6:] for t in tickers}

    # -- rendering -----------------------------------------------------------

    def render_ticker(self, ticker: str) -> str:
        if self.level.masks_tickers:
            try:
                return self.ticker_to_alias[ticker]
            except KeyError:
                raise MaskingError(f"ticker {ticker!r} not covered by the alias map") from None
        if ticker not in self.ticker_to_alias:
            raise MaskingError(f"ticker {ticker!r} not covered by the alias map")
        return ticker

    def render_date(self, index: int) -> str:
        if self.level.masks_dates:
            return f"day_{index - self.anchor_index:+d}"
        return self.calendar.date(index).isoformat()

    # -- resolution (inverse) --------------------------------------------------

    def resolve_ticker(self, token: str) -> str:
        """Accept whatever identifier form the current level exposes."""
        m = ALIAS_RE.match(token)
        if m:
            try:
                return self.alias_to_ticker[token]
            except KeyError:
                raise UnknownAliasError(f"unknown alias {token!r}") from None
        if not self.level.masks_tickers and token in self.ticker_to_alias:
            return token
        raise UnknownAliasError(f"unknown identifier {token!r}")

    def resolve_date(self, token: str) -> int:
        m = DAY_TOKEN_RE.match(token)
        if m:
            idx = self.anchor_index + int(m.group(1))
            if idx < 0 or idx >= len(self.calendar):
                raise MaskingError(f"day token {token!r} falls outside the calendar")
            return idx
        try:
            import datetime as dt

            return self.calendar.index(dt.date.fromisoformat(token))
        except (ValueError, KeyError):
            raise MaskingError(f"cannot resolve date token {token!r}") from None

    # -- serialization ---------------------------------------------------------

    def to_json(self) -> dict:
        return {
            "seed": self.seed,
            "level": self.level.value,
            "anchor_index": self.anchor_index,
            "anchor_date": self.calendar.date(self.anchor_index).isoformat(),
            "ticker_to_alias": dict(sorted(self.ticker_to_alias.items())),
        }


def mask(payload, amap: AliasMap):
    """Render a tagged payload tree into plain JSON under the map's level.

    Tagged ticker/date leaves become alias or real tokens; every other leaf,
    in particular every numeric, passes through unchanged.
    """
    if isinstance(payload, TickerRef):
        return amap.render_ticker(payload.value)
    if isinstance(payload, DateRef):
        return amap.render_date(payload.index)
    if isinstance(payload, dict):
        return {mask(k, amap): mask(v, amap) for k, v in payload.items()}
    if isinstance(payload, (list, tuple)):
        return [mask(v, amap) for v in payload]
    return payload


def unmask(payload, amap: AliasMap):
    """Invert :func:`mask` on a rendered tree.

    Alias tokens become real tickers and relative day tokens become ISO
    dates; all other leaves pass through. Unknown aliases raise
    :class:`UnknownAliasError` so the harness can surface an
    invalid-argument tool failure instead of crashing.
    """
    if isinstance(payload, str):
        if ALIAS_RE.match(payload):
            return amap.resolve_ticker(payload)
        if DAY_TOKEN_RE.match(payload):
            return amap.calendar.date(amap.resolve_date(payload)).isoformat()
        return payload
    if isinstance(payload, dict):
        return {unmask(k, amap): unmask(v, amap) for k, v in payload.items()}
    if isinstance(payload, (list, tuple)):
        return [unmask(v, amap) for v in payload]
    return payload


@dataclass(frozen=True)
class Leak:
    kind: str  # "ticker" | "date"
    token: str


def _serialize(payload) -> str:
    if isinstance(payload, str):
        return payload
    return json.dumps(payload, ensure_ascii=False, default=str)


def leak_scan(payload, amap: AliasMap) -> list[Leak]:
    """Find identifying tokens that the map's level should have masked.

    Checks, over the serialized payload:

    - real exchange-prefixed ticker strings from the map's domain,
    - standalone 6-digit runs equal to a known ticker's numeric part
      (digit runs containing a decimal point are numbers, not tickers),
    - ISO-8601 date tokens.

    Ticker checks run only when the level masks tickers, date checks only
    when it masks dates. An empty list means clean.
    """
    text = _serialize(payload)
    leaks: list[Leak] = []
    if amap.level.masks_tickers:
        covered: list[tuple[int, int]] = []
        for m in _TICKER_STRING_RE.finditer(text):
            if m.group(1) in amap._numeric_parts:
                leaks.append(Leak("ticker", m.group(0)))
                covered.append(m.span())
        for m in _NUMBER_RUN_RE.finditer(text):
            run = m.group(0)
            if "." in run:
                continue
            if len(run) == 6 and run in amap._numeric_parts:
                if any(lo <= m.start() and m.end() <= hi for lo, hi in covered):
                    continue  # already reported as a prefixed ticker string
                leaks.append(Leak("ticker", run))
    if amap.level.masks_dates:
        for m in _ISO_DATE_RE.finditer(text):
            leaks.append(Leak("date", m.group(1)))
    return leaks
