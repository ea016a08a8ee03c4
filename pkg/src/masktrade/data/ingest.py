"""CSV ingestion for bars, trading calendars and universe membership.

File formats are documented in docs/FORMATS.md. Malformed input is a hard
error carrying the offending line number; the store constructor re-checks
OHLC invariants and duplicate keys.
"""
from __future__ import annotations

import csv
import datetime as dt
import logging
from pathlib import Path

from .market import Bar, MarketStore, TradingCalendar

logger = logging.getLogger(__name__)

BAR_COLUMNS = ["ticker", "date", "open", "high", "low", "close", "volume", "amount"]


class IngestError(ValueError):
    def __init__(self, path, line_no: int | None, message: str):
        loc = f"{path}:{line_no}" if line_no is not None else str(path)
        super().__init__(f"{loc}: {message}")
        self.line_no = line_no


def _parse_date(text: str, path, line_no: int) -> dt.date:
    try:
        return dt.date.fromisoformat(text.strip())
    except ValueError:
        raise IngestError(path, line_no, f"bad ISO-8601 date {text!r}") from None


def load_calendar_file(path) -> TradingCalendar:
    """One ISO date per line, blank lines ignored."""
    dates = []
    with open(path, "r", encoding="utf-8") as fh:
        for line_no, line in enumerate(fh, start=1):
            text = line.strip()
            if not text:
                continue
            dates.append(_parse_date(text, path, line_no))
    try:
        return TradingCalendar(sorted(set(dates)))
    except ValueError as e:
        raise IngestError(path, None, str(e)) from None


def load_membership_csv(path) -> dict[str, list[tuple[dt.date, dt.date | None]]]:
    """Columns ticker,in_date,out_date; empty out_date means still a member."""
    out: dict[str, list[tuple[dt.date, dt.date | None]]] = {}
    with open(path, "r", encoding="utf-8", newline="") as fh:
        reader = csv.DictReader(fh)
        if reader.fieldnames is None or [c.strip() for c in reader.fieldnames] != ["ticker", "in_date", "out_date"]:
            raise IngestError(path, 1, "expected header ticker,in_date,out_date")
        for line_no, row in enumerate(reader, start=2):
            ticker = row["ticker"].strip()
            in_date = _parse_date(row["in_date"], path, line_no)
            out_text = (row["out_date"] or "").strip()
            out_date = _parse_date(out_text, path, line_no) if out_text else None
            if out_date is not None and out_date <= in_date:
                raise IngestError(path, line_no, "out_date must be after in_date")
            out.setdefault(ticker, []).append((in_date, out_date))
    return out


def ingest_csv(
    path,
    calendar: str | Path | None = None,
    membership: str | Path | None = None,
    market_id: str | None = None,
) -> MarketStore:
    """Load a bar CSV into a MarketStore.

    The calendar argument is an optional calendar file; without it the
    calendar is inferred from the distinct bar dates. Board membership is
    derived from the ticker prefix.
    """
    bars: list[Bar] = []
    seen: set[tuple[str, dt.date]] = set()
    with open(path, "r", encoding="utf-8", newline="") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise IngestError(path, 1, "empty file") from None
        if [c.strip() for c in header] != BAR_COLUMNS:
            raise IngestError(path, 1, f"expected header {','.join(BAR_COLUMNS)}")
        for line_no, row in enumerate(reader, start=2):
            if not row or (len(row) == 1 and not row[0].strip()):
                continue
            if len(row) != len(BAR_COLUMNS):
                raise IngestError(path, line_no, f"expected {len(BAR_COLUMNS)} fields, got {len(row)}")
            ticker = row[0].strip()
            date = _parse_date(row[1], path, line_no)
            try:
                o, h, l, c, v, a = (float(x) for x in row[2:])
            except ValueError:
                raise IngestError(path, line_no, "non-numeric price/volume field") from None
            key = (ticker, date)
            if key in seen:
                raise IngestError(path, line_no, f"duplicate bar for {ticker} on {date}")
            seen.add(key)
            bar = Bar(ticker, date, o, h, l, c, v, a)
            try:
                bar.validate()
            except ValueError as e:
                raise IngestError(path, line_no, str(e)) from None
            bars.append(bar)
    if not bars:
        raise IngestError(path, None, "no bars in file")

    cal = load_calendar_file(calendar) if calendar is not None else None
    mem = load_membership_csv(membership) if membership is not None else None
    mid = market_id or f"csv-{Path(path).stem}"
    try:
        store = MarketStore(bars, calendar=cal, membership=mem, market_id=mid)
    except ValueError as e:
        raise IngestError(path, None, str(e)) from None
    logger.info("ingested %d bars, %d tickers, %d days from %s",
                len(bars), len(store.tickers), len(store.calendar), path)
    return store
