import datetime as dt

import pytest

from masktrade.data.market import Bar, MarketStore
from masktrade.data.styles import STYLE_FACTORS

from conftest import make_flat_store, make_path_store


def test_constant_price_constant_volume():
    store = make_flat_store(n_days=260)
    v = store.style_exposures(255)[0].values
    assert v["RV_60"] == 0.0
    assert v["CV_VOL"] == 0.0
    assert v["HIGH_52W"] == 1.0
    assert v["REV_ON"] == 0.0 and v["MOM_ID"] == 0.0
    assert v["SKEW"] is None  # zero-variance returns have no defined skew
    assert v["CORR_PV"] is None


def test_mom_12_1_direct_evaluation():
    # one +10% jump between the t-252 and t-21 reference bars, flat since:
    # MOM_12_1 = close[t-21]/close[t-252] - 1 = 0.10 exactly
    closes = [10.0 if k < 100 else 11.0 for k in range(261)]
    store = make_path_store({"SH600001": closes})
    v = store.style_exposures(260)[0].values
    assert v["MOM_12_1"] == pytest.approx(0.10, abs=1e-12)


def test_illiq_zero_amount_guard():
    n = 30
    bars = []
    base = dt.date(2024, 1, 1)
    for i in range(n):
        amount = 0.0 if i == n - 2 else 1e6
        px = 10.0 + 0.01 * i
        bars.append(Bar("SH600001", base + dt.timedelta(days=i), px, px + 0.2, px - 0.2, px, 1000.0, amount))
        # all-zero amount name
        bars.append(Bar("SH600002", base + dt.timedelta(days=i), px, px + 0.2, px - 0.2, px, 1000.0, 0.0))
    store = MarketStore(bars)
    rows = {r.ticker: r.values for r in store.style_exposures(n - 1, store.tickers)}
    assert rows["SH600001"]["ILLIQ"] is not None  # zero day excluded from the mean
    assert rows["SH600002"]["ILLIQ"] is None      # nothing left to average


def test_missing_vs_zero_never_confused():
    store = make_flat_store(n_days=40)  # not enough history for 252-day factors
    v = store.style_exposures(35)[0].values
    assert v["MOM_12_1"] is None
    assert v["HIGH_52W"] is None
    assert v["RV_60"] is None  # needs 61 bars


def test_high_52w_bounds(mid_store):
    for r in mid_store.style_exposures(330):
        h = r.values["HIGH_52W"]
        if h is not None:
            assert 0.0 < h <= 1.0


def test_all_nine_factors_present_on_long_history(mid_store):
    row = mid_store.style_exposures(335)[0]
    assert set(row.values) == set(STYLE_FACTORS)
    assert all(row.values[f] is not None for f in STYLE_FACTORS)


def test_point_in_time_styles(mid_store):
    asof = 320
    full = {r.ticker: r.values for r in mid_store.style_exposures(asof)}
    truncated_bars = []
    for t in mid_store.tickers:
        s = mid_store.series(t)
        for d in s.day_idx:
            if d < asof:
                truncated_bars.append(mid_store.bar(t, int(d)))
    cut = MarketStore(truncated_bars)
    trunc = {r.ticker: r.values for r in cut.style_exposures(asof)}
    for t in full:
        for f in STYLE_FACTORS:
            a, b = full[t][f], trunc[t][f]
            assert (a is None) == (b is None)
            if a is not None:
                assert a == pytest.approx(b, abs=0, rel=0) or a == b
