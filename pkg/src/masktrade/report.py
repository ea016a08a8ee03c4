"""Leaderboard and attribution-table assembly from episode directories."""
from __future__ import annotations

import csv
import json
from pathlib import Path

import numpy as np

LEADERBOARD_FIELDS = (
    "total_return", "sharpe", "max_drawdown", "information_ratio",
    "annualized_turnover", "hhi", "cash_ratio", "abstention_rate",
    "parse_failure_rate", "ece",
)


def _median_iqr(values: list[float]) -> tuple[float, float, float]:
    arr = np.asarray(values, dtype=np.float64)
    return float(np.median(arr)), float(np.percentile(arr, 25)), float(np.percentile(arr, 75))


def scan_cells(episodes_root) -> list[dict]:
    """Collect every completed cell (panel.json present) under a run root."""
    cells = []
    root = Path(episodes_root)
    for panel_path in sorted(root.glob("*/panel.json")):
        cell_dir = panel_path.parent
        meta = json.loads((cell_dir / "config.json").read_text(encoding="utf-8"))
        panel = json.loads(panel_path.read_text(encoding="utf-8"))
        attribution = None
        att_path = cell_dir / "attribution.json"
        if att_path.exists():
            attribution = json.loads(att_path.read_text(encoding="utf-8"))
        bench = []
        with open(cell_dir / "benchmark_nav.csv", "r", encoding="utf-8") as fh:
            next(fh)
            for line in fh:
                bench.append(float(line.strip().split(",")[1]))
        cells.append({
            "cell": cell_dir.name,
            "dir": str(cell_dir),
            "meta": meta,
            "panel": panel,
            "attribution": attribution,
            "benchmark_return": bench[-1] / bench[0] - 1.0 if bench else 0.0,
        })
    return cells


def missing_panels(episodes_root) -> list[str]:
    root = Path(episodes_root)
    out = []
    for cfg in sorted(root.glob("*/config.json")):
        if not (cfg.parent / "panel.json").exists():
            out.append(cfg.parent.name)
    return out


def _group_key(meta: dict) -> tuple:
    return (meta["mode"], meta["level"], meta["window_start"], meta["window_end"])


def cell_rows(cells: list[dict]) -> list[dict]:
    """One flat row per (agent, seed, window, mode, level) cell."""
    rows = []
    for c in cells:
        m = c["meta"]
        row = {
            "cell": c["cell"],
            "agent": m["agent"],
            "seed": m["seed"],
            "mode": m["mode"],
            "level": m["level"],
            "window_start": m["window_start"],
            "window_end": m["window_end"],
            "benchmark_return": c["benchmark_return"],
        }
        row.update(c["panel"])
        if c["attribution"]:
            row["selection_alpha"] = c["attribution"]["cum_alpha"]
            row["attribution_common"] = c["attribution"]["cum_common"]
            row["attribution_style"] = sum(c["attribution"]["cum_style"].values())
            row["attribution_port"] = c["attribution"]["cum_port"]
        rows.append(row)
    rows.sort(key=lambda r: r["cell"])
    return rows


def build_leaderboard(cells: list[dict], benchmark_label: str) -> list[dict]:
    """One row per (group, agent): seed-median metrics, benchmark row inserted
    at its return-implied rank within each group."""
    groups: dict[tuple, dict[str, list[dict]]] = {}
    for c in cells:
        g = groups.setdefault(_group_key(c["meta"]), {})
        g.setdefault(c["meta"]["agent"], []).append(c)

    rows: list[dict] = []
    for gkey in sorted(groups):
        mode, level, wstart, wend = gkey
        agent_rows = []
        bench_returns = []
        for agent, agent_cells in sorted(groups[gkey].items()):
            row = {
                "mode": mode, "level": level,
                "window_start": wstart, "window_end": wend,
                "agent": agent,
                "n_seeds": len(agent_cells),
                "is_benchmark": False,
            }
            for f in LEADERBOARD_FIELDS:
                vals = [c["panel"][f] for c in agent_cells if c["panel"][f] is not None]
                if vals:
                    med, q1, q3 = _median_iqr(vals)
                    row[f] = med
                    if f == "total_return":
                        row["total_return_q1"] = q1
                        row["total_return_q3"] = q3
                else:
                    row[f] = None
            alphas = [c["attribution"]["cum_alpha"] for c in agent_cells if c["attribution"]]
            row["selection_alpha"] = float(np.median(alphas)) if alphas else None
            agent_rows.append(row)
            bench_returns.extend(c["benchmark_return"] for c in agent_cells)

        bench_row = {
            "mode": mode, "level": level,
            "window_start": wstart, "window_end": wend,
            "agent": benchmark_label,
            "n_seeds": 0,
            "is_benchmark": True,
            "total_return": float(np.median(bench_returns)) if bench_returns else 0.0,
            "annualized_turnover": 0.0,
            "selection_alpha": None,
        }
        for f in LEADERBOARD_FIELDS:
            bench_row.setdefault(f, None)
        agent_rows.append(bench_row)
        agent_rows.sort(key=lambda r: (-(r["total_return"] if r["total_return"] is not None else -1e18),
                                       r["agent"]))
        for rank, r in enumerate(agent_rows, start=1):
            r["rank"] = rank
        rows.extend(agent_rows)
    return rows


def build_attribution_table(cells: list[dict]) -> list[dict]:
    """Cumulative (common, style, alpha, port) per agent, sorted by alpha."""
    groups: dict[tuple, dict[str, list[dict]]] = {}
    for c in cells:
        if not c["attribution"]:
            continue
        g = groups.setdefault(_group_key(c["meta"]), {})
        g.setdefault(c["meta"]["agent"], []).append(c)
    rows = []
    for gkey in sorted(groups):
        mode, level, wstart, wend = gkey
        for agent, agent_cells in sorted(groups[gkey].items()):
            def med(key):
                return float(np.median([c["attribution"][key] for c in agent_cells]))
            common = med("cum_common")
            alpha = med("cum_alpha")
            style = float(np.median([sum(c["attribution"]["cum_style"].values()) for c in agent_cells]))
            port = med("cum_port")
            rows.append({
                "mode": mode, "level": level,
                "window_start": wstart, "window_end": wend,
                "agent": agent,
                "common": common,
                "style": style,
                "selection_alpha": alpha,
                "port": port,
                "identity_gap": common + style + alpha - port if len(agent_cells) == 1 else None,
                "linking_residual": med("linking_residual"),
            })
    rows.sort(key=lambda r: (r["mode"], r["level"], r["window_start"], -r["selection_alpha"]))
    return rows


def write_rows_csv(rows: list[dict], path) -> None:
    if not rows:
        Path(path).write_text("", encoding="utf-8")
        return
    cols: list[str] = []
    for r in rows:
        for k in r:
            if k not in cols:
                cols.append(k)
    with open(path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.DictWriter(fh, fieldnames=cols)
        writer.writeheader()
        for r in rows:
            writer.writerow({k: ("" if r.get(k) is None else r.get(k)) for k in cols})


def write_equity_curves(cells: list[dict], path) -> None:
    """date, benchmark, then one NAV column per cell, for same-window cells."""
    if not cells:
        Path(path).write_text("", encoding="utf-8")
        return
    gkey = _group_key(cells[0]["meta"])
    same = [c for c in cells if _group_key(c["meta"]) == gkey]
    series = {}
    dates = None
    bench = None
    for c in same:
        nav = []
        ds = []
        with open(Path(c["dir"]) / "nav.csv", "r", encoding="utf-8") as fh:
            next(fh)
            for line in fh:
                d, v = line.strip().split(",")
                ds.append(d)
                nav.append(v)
        series[c["cell"]] = nav
        if dates is None:
            dates = ds
            bench = []
            with open(Path(c["dir"]) / "benchmark_nav.csv", "r", encoding="utf-8") as fh:
                next(fh)
                for line in fh:
                    bench.append(line.strip().split(",")[1])
    names = sorted(series)
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("date,benchmark," + ",".join(names) + "\n")
        for i, d in enumerate(dates or []):
            fh.write(d + "," + bench[i] + "," + ",".join(series[n][i] for n in names) + "\n")
