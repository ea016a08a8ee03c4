"""Daily cross-sectional return decomposition.

Each day t fits a weighted least-squares regression of close-to-close
returns on the previous day's standardized style exposures plus an
intercept. The intercept is the universe-wide common return, the slope
vector the style-factor returns, and the residuals stock-specific. A
portfolio's day return then splits exactly into

    port = common * sum(w) + sum_k (sum_i w_i x_ik) * lambda_k + alpha

with alpha the weighted residual sum; the identity is algebraic, holding to
machine precision whenever every held name sits in the fitted cross-section
(names missing from it enter as zero-exposure rows and land in alpha).

Regression weights default to the square root of 20-day average traded
amount, a liquidity stand-in for size available from price/volume data
alone; results are invariant to rescaling the weight vector.
"""
from __future__ import annotations

import json
import logging
from dataclasses import dataclass, field

import numpy as np

from .data.market import MarketStore
from .data.styles import STYLE_FACTORS

logger = logging.getLogger(__name__)

WINSOR_MAD_MULT = 5.0
VIF_THRESHOLD = 5.0
VIF_CAP = 1e6
MIN_CROSS_SECTION = 10


@dataclass
class CrossSection:
    day: int
    tickers: list[str]
    r: np.ndarray            # close-to-close returns, day t
    X: np.ndarray            # standardized exposures from day t-1 info
    factors: list[str]       # column names of X
    wls_weights: np.ndarray  # positive regression weights
    missing_mask: np.ndarray  # True where the raw exposure was missing


@dataclass
class FactorReturns:
    day: int
    f0: float
    lam: np.ndarray
    residuals: np.ndarray
    factors: list[str]
    rank_deficient: bool = False


@dataclass
class DailyAttribution:
    day: int
    port_return: float
    common: float
    style: dict[str, float]
    alpha: float
    invested_weight: float
    uncovered: list[str] = field(default_factory=list)

    @property
    def style_total(self) -> float:
        return float(sum(self.style.values()))


@dataclass
class VifReport:
    vifs: dict[str, float]
    kept: list[str]
    dropped: list[str]
    window: tuple[int, int]

    def to_json(self) -> dict:
        return {"vifs": self.vifs, "kept": self.kept, "dropped": self.dropped,
                "calibration_window": list(self.window)}


@dataclass
class AttributionResult:
    days: list[DailyAttribution]
    factors: list[str]
    cum_port: float
    cum_common: float
    cum_style: dict[str, float]
    cum_alpha: float
    nav_return: float
    linking_residual: float
    cash_drag: float

    def to_json(self) -> dict:
        return {
            "factors": self.factors,
            "cum_port": self.cum_port,
            "cum_common": self.cum_common,
            "cum_style": self.cum_style,
            "cum_style_total": float(sum(self.cum_style.values())),
            "cum_alpha": self.cum_alpha,
            "nav_return": self.nav_return,
            "linking_residual": self.linking_residual,
            "cash_drag": self.cash_drag,
            "days": [{
                "day": d.day,
                "port": d.port_return,
                "common": d.common,
                "style": d.style,
                "alpha": d.alpha,
                "invested_weight": d.invested_weight,
                "uncovered": d.uncovered,
            } for d in self.days],
        }


# -- preprocessing -----------------------------------------------------------


def winsorize_standardize(column: np.ndarray, missing: np.ndarray) -> np.ndarray | None:
    """Clip at median +- 5*MAD, then z-score; missing entries become 0.

    Returns None when the column degenerates (zero spread after clipping).
    """
    vals = column[~missing]
    if len(vals) < MIN_CROSS_SECTION:
        return None
    med = float(np.median(vals))
    mad = float(np.median(np.abs(vals - med)))
    lo, hi = med - WINSOR_MAD_MULT * mad, med + WINSOR_MAD_MULT * mad
    clipped = np.clip(vals, lo, hi)
    if float(np.ptp(clipped)) == 0.0:
        return None
    sd = float(np.std(clipped, ddof=1))
    if sd == 0.0:
        return None
    z = (clipped - float(np.mean(clipped))) / sd
    out = np.zeros_like(column)
    out[~missing] = z
    return out


def build_cross_section(store: MarketStore, day: int, factors=STYLE_FACTORS) -> CrossSection | None:
    """Assemble the day-t cross-section over investable names.

    Investable means a bar on both t and t-1. Exposures come from day t-1
    information; factors that lack 10 non-missing names or degenerate after
    clipping are dropped for the day.
    """
    if day < 1:
        return None
    members = store.universe(day).members
    tickers = [t for t in members if store.has_bar(t, day) and store.has_bar(t, day - 1)]
    if len(tickers) < MIN_CROSS_SECTION:
        return None
    r = np.array([
        store.bar(t, day).close / store.bar(t, day - 1).close - 1.0 for t in tickers
    ], dtype=np.float64)

    style_rows = store.style_exposures(day, tickers)
    raw = {f: np.zeros(len(tickers)) for f in factors}
    miss = {f: np.zeros(len(tickers), dtype=bool) for f in factors}
    for i, row in enumerate(style_rows):
        for f in factors:
            v = row.values.get(f)
            if v is None:
                miss[f][i] = True
            else:
                raw[f][i] = v

    cols = []
    kept = []
    any_missing = np.zeros(len(tickers), dtype=bool)
    for f in factors:
        z = winsorize_standardize(raw[f], miss[f])
        if z is None:
            continue
        cols.append(z)
        kept.append(f)
        any_missing |= miss[f]
    if not kept:
        return None
    X = np.column_stack(cols)

    weights = np.empty(len(tickers))
    for i, t in enumerate(tickers):
        s = store.series(t)
        n = s.pos_before(day)
        window = s.amount[max(0, n - 20):n]
        avg = float(np.mean(window)) if len(window) else 0.0
        weights[i] = np.sqrt(avg) if avg > 0 else 1.0
    weights /= np.mean(weights)

    return CrossSection(day, tickers, r, X, kept, weights, any_missing)


# -- VIF screening ------------------------------------------------------------


def vif_values(X: np.ndarray, factors: list[str]) -> dict[str, float]:
    """VIF_k = 1 / (1 - R^2) from regressing column k on the others."""
    out = {}
    n, k = X.shape
    for j in range(k):
        y = X[:, j]
        others = np.delete(X, j, axis=1)
        design = np.column_stack([np.ones(n), others])
        beta, *_ = np.linalg.lstsq(design, y, rcond=None)
        resid = y - design @ beta
        ss_res = float(resid @ resid)
        ss_tot = float(((y - y.mean()) ** 2).sum())
        if ss_tot == 0.0:
            out[factors[j]] = VIF_CAP
            continue
        r2 = 1.0 - ss_res / ss_tot
        out[factors[j]] = VIF_CAP if r2 >= 1.0 - 1.0 / VIF_CAP else min(VIF_CAP, 1.0 / (1.0 - r2))
    return out


def vif_screen(
    cross_sections: list[CrossSection],
    threshold: float = VIF_THRESHOLD,
    window: tuple[int, int] | None = None,
) -> VifReport:
    """Iteratively drop the worst-VIF factor on pooled calibration data.

    The calibration cross-sections must come from strictly before the
    evaluation window; the caller owns that split.
    """
    if not cross_sections:
        raise ValueError("no calibration cross-sections")
    factors = [f for f in STYLE_FACTORS if all(f in cs.factors for cs in cross_sections)]
    if len(factors) < 2:
        raise ValueError("fewer than 2 factors available across the calibration window")
    blocks = [
        np.column_stack([cs.X[:, cs.factors.index(f)] for f in factors])
        for cs in cross_sections
    ]
    X = np.vstack(blocks)

    kept = list(factors)
    dropped = []
    first_vifs: dict[str, float] | None = None
    while True:
        vifs = vif_values(X, kept)
        if first_vifs is None:
            first_vifs = dict(vifs)
        worst = max(kept, key=lambda f: vifs[f])
        if vifs[worst] <= threshold:
            break
        if len(kept) <= 2:
            raise ValueError("VIF screening would leave fewer than 2 factors")
        j = kept.index(worst)
        kept.pop(j)
        dropped.append(worst)
        X = np.delete(X, j, axis=1)
    win = window or (cross_sections[0].day, cross_sections[-1].day)
    return VifReport(vifs=first_vifs, kept=kept, dropped=dropped, window=win)


# -- daily fit -----------------------------------------------------------------


def fit_day(cs: CrossSection) -> FactorReturns:
    """Weighted least squares of r on [1 | X].

    Solved through the sqrt-weight transform and an SVD least-squares call,
    which hands back the minimum-norm solution on rank-deficient days.
    Residuals are defined as r - fitted, so the decomposition identity is
    exact by construction.
    """
    n, k = cs.X.shape
    if n <= k + 1:
        raise ValueError(f"cross-section too small: {n} names for {k} factors")
    design = np.column_stack([np.ones(n), cs.X])
    sw = np.sqrt(cs.wls_weights)
    beta, _, rank, _ = np.linalg.lstsq(design * sw[:, None], cs.r * sw, rcond=None)
    fitted = design @ beta
    return FactorReturns(
        day=cs.day,
        f0=float(beta[0]),
        lam=beta[1:].copy(),
        residuals=cs.r - fitted,
        factors=list(cs.factors),
        rank_deficient=rank < k + 1,
    )


def wls_standard_errors(cs: CrossSection, fr: FactorReturns) -> np.ndarray:
    """Classical WLS standard errors for [f0, lambda]."""
    n, k = cs.X.shape
    design = np.column_stack([np.ones(n), cs.X])
    w = cs.wls_weights
    xtwx = design.T @ (design * w[:, None])
    dof = n - (k + 1)
    sigma2 = float((w * fr.residuals ** 2).sum() / dof)
    cov = sigma2 * np.linalg.pinv(xtwx)
    return np.sqrt(np.diag(cov))


# -- portfolio aggregation -------------------------------------------------------


def attribute_day(
    fr: FactorReturns,
    cs: CrossSection,
    weights: dict[str, float],
    returns_lookup,
) -> DailyAttribution:
    """Decompose one day of portfolio return under the fitted cross-section.

    `weights` maps ticker to its previous-close weight of NAV; cash is the
    remainder and contributes zero everywhere. Held names outside the
    cross-section are zero-exposure rows: their full excess over the common
    return lands in alpha.
    """
    idx = {t: i for i, t in enumerate(cs.tickers)}
    sum_w = float(sum(weights.values()))
    common = fr.f0 * sum_w
    style = {f: 0.0 for f in fr.factors}
    alpha = 0.0
    port = 0.0
    uncovered = []
    for t, w in weights.items():
        i = idx.get(t)
        if i is None:
            r_t = returns_lookup(t)
            if r_t is None:
                r_t = 0.0
            port += w * r_t
            alpha += w * (r_t - fr.f0)
            uncovered.append(t)
            continue
        port += w * float(cs.r[i])
        alpha += w * float(fr.residuals[i])
        for j, f in enumerate(fr.factors):
            style[f] += w * float(cs.X[i, j]) * float(fr.lam[j])
    return DailyAttribution(
        day=cs.day,
        port_return=port,
        common=common,
        style=style,
        alpha=alpha,
        invested_weight=sum_w,
        uncovered=sorted(uncovered),
    )


def attribute_episode(
    episode,
    store: MarketStore,
    factors: list[str] | None = None,
) -> AttributionResult:
    """Run the daily decomposition over an episode's holdings.

    Day-t weights are the episode's close-of-(t-1) position values over the
    t-1 NAV mark, so only the book actually held overnight is attributed.
    Trading-cost and intraday effects sit in the linking residual against
    the NAV return, reported rather than hidden.
    """
    if isinstance(episode, dict):
        records = episode["records"]
        navs = episode["nav"]
        days = [r["day_index"] for r in records]
        positions_by_day = [{k: v for k, v in r["positions_close"].items()} for r in records]
    else:
        records = episode.records
        navs = episode.nav_values
        days = [r.day_index for r in records]
        positions_by_day = [dict(r.positions_close) for r in records]

    factor_list = list(factors) if factors else list(STYLE_FACTORS)
    out_days: list[DailyAttribution] = []
    for i in range(1, len(days)):
        day = days[i]
        weights = {}
        prev_nav = navs[i - 1]
        for t, value in positions_by_day[i - 1].items():
            weights[t] = value / prev_nav if prev_nav > 0 else 0.0
        cs = build_cross_section(store, day, factor_list)
        if cs is None:
            logger.info("day %d skipped: cross-section unavailable", day)
            continue
        try:
            fr = fit_day(cs)
        except ValueError as e:
            logger.info("day %d skipped: %s", day, e)
            continue

        def ret_of(t, _day=day):
            if store.has_bar(t, _day) and store.has_bar(t, _day - 1):
                return store.bar(t, _day).close / store.bar(t, _day - 1).close - 1.0
            return None

        out_days.append(attribute_day(fr, cs, weights, ret_of))

    cum_style = {f: 0.0 for f in factor_list}
    cum_common = 0.0
    cum_alpha = 0.0
    cum_port = 0.0
    for d in out_days:
        cum_common += d.common
        cum_alpha += d.alpha
        cum_port += d.port_return
        for f, v in d.style.items():
            cum_style[f] = cum_style.get(f, 0.0) + v
    nav_return = navs[-1] / navs[0] - 1.0 if navs else 0.0
    invested = [d.invested_weight for d in out_days]
    cash_drag = float(np.mean([1.0 - w for w in invested])) if invested else 1.0
    return AttributionResult(
        days=out_days,
        factors=factor_list,
        cum_port=cum_port,
        cum_common=cum_common,
        cum_style={f: v for f, v in cum_style.items() if v != 0.0 or f in (out_days[0].style if out_days else {})},
        cum_alpha=cum_alpha,
        nav_return=nav_return,
        linking_residual=nav_return - cum_port,
        cash_drag=cash_drag,
    )


# -- cohort exposures -------------------------------------------------------------


def episode_mean_exposures(episode, store: MarketStore, factors=None) -> dict[str, float] | None:
    """Average portfolio-weighted z-scored exposure over invested days.

    Weights are normalized over the invested sleeve; days with an empty book
    do not count. Returns None when the episode never invests.
    """
    factor_list = list(factors) if factors else list(STYLE_FACTORS)
    if isinstance(episode, dict):
        records = episode["records"]
        days = [r["day_index"] for r in records]
        positions_by_day = [r["positions_close"] for r in records]
    else:
        records = episode.records
        days = [r.day_index for r in records]
        positions_by_day = [r.positions_close for r in records]

    sums = {f: 0.0 for f in factor_list}
    counts = {f: 0 for f in factor_list}
    for i in range(1, len(days)):
        values = positions_by_day[i - 1]
        total = sum(values.values())
        if total <= 0:
            continue
        cs = build_cross_section(store, days[i], factor_list)
        if cs is None:
            continue
        idx = {t: j for j, t in enumerate(cs.tickers)}
        for f in factor_list:
            if f not in cs.factors:
                continue
            col = cs.factors.index(f)
            exp = 0.0
            for t, value in values.items():
                j = idx.get(t)
                if j is not None:
                    exp += (value / total) * float(cs.X[j, col])
            sums[f] += exp
            counts[f] += 1
    if all(c == 0 for c in counts.values()):
        return None
    return {f: (sums[f] / counts[f] if counts[f] else 0.0) for f in factor_list}


def cohort_exposure_table(
    cohorts: dict[str, list],
    store: MarketStore,
    factors=None,
    flag_sigma: float = 0.4,
) -> dict:
    """Per-cohort mean exposures with pairwise gap flags.

    `cohorts` maps cohort name to a list of episodes. Episodes with zero
    invested days are excluded and logged.
    """
    factor_list = list(factors) if factors else list(STYLE_FACTORS)
    means: dict[str, dict[str, float]] = {}
    for name, episodes in cohorts.items():
        rows = []
        for ep in episodes:
            m = episode_mean_exposures(ep, store, factor_list)
            if m is None:
                logger.info("cohort %s: an episode had no invested days; excluded", name)
                continue
            rows.append(m)
        if not rows:
            raise ValueError(f"cohort {name!r} has no invested episodes")
        means[name] = {f: float(np.mean([r[f] for r in rows])) for f in factor_list}

    names = sorted(means)
    table = {"factors": factor_list, "cohorts": means, "gaps": {}}
    if len(names) == 2:
        a, b = names
        gaps = {f: means[a][f] - means[b][f] for f in factor_list}
        table["gaps"] = {
            f: {"gap": g, "flag": abs(g) > flag_sigma} for f, g in gaps.items()
        }
    return table


def write_cohort_table(table: dict, path) -> None:
    """CSV: factor, one mean column per cohort, gap and flag when two cohorts."""
    names = sorted(table["cohorts"])
    with open(path, "w", encoding="utf-8") as fh:
        cols = ["factor"] + names + (["gap", "flag"] if table["gaps"] else [])
        fh.write(",".join(cols) + "\n")
        for f in table["factors"]:
            row = [f] + [repr(table["cohorts"][n][f]) for n in names]
            if table["gaps"]:
                row += [repr(table["gaps"][f]["gap"]), str(table["gaps"][f]["flag"])]
            fh.write(",".join(row) + "\n")


def write_attribution(result: AttributionResult, json_path, csv_path=None) -> None:
    with open(json_path, "w", encoding="utf-8") as fh:
        json.dump(result.to_json(), fh, indent=2, sort_keys=True)
        fh.write("\n")
    if csv_path:
        with open(csv_path, "w", encoding="utf-8") as fh:
            cols = ["day", "common"] + [f"style_{f}" for f in result.factors] + ["alpha", "port"]
            fh.write(",".join(cols) + "\n")
            for d in result.days:
                row = [str(d.day), repr(d.common)]
                row += [repr(d.style.get(f, 0.0)) for f in result.factors]
                row += [repr(d.alpha), repr(d.port_return)]
                fh.write(",".join(row) + "\n")
