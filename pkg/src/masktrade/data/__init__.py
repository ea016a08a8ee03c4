from .market import (
    Bar,
    Board,
    BoardClass,
    MarketStore,
    TradingCalendar,
    UniverseSnapshot,
    classify_board,
)
from .features import FEATURE_FIELDS, FeatureRow, compute_features
from .styles import STYLE_FACTORS, StyleExposureRow, compute_style_exposures
from .ingest import ingest_csv, load_calendar_file, load_membership_csv
from .synth import REGIME_PROFILES, synth_market

__all__ = [
    "Bar",
    "Board",
    "BoardClass",
    "MarketStore",
    "TradingCalendar",
    "UniverseSnapshot",
    "classify_board",
    "FeatureRow",
    "FEATURE_FIELDS",
    "compute_features",
    "StyleExposureRow",
    "STYLE_FACTORS",
    "compute_style_exposures",
    "ingest_csv",
    "load_calendar_file",
    "load_membership_csv",
    "synth_market",
    "REGIME_PROFILES",
]
