"""Operator command line.

Subcommands: ingest, synth, run, metrics, attribute, report, probe-gen,
probe-score, probe-baseline, serve-agent-stdio. Every command is
deterministic given its inputs and seed, and writes only under the
requested output path. `masktrade run --help-config` lists every config key
with its default.
"""
from __future__ import annotations

import argparse
import json
import sys
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path

from . import attribution as attr_mod
from . import metrics as metrics_mod
from . import probe as probe_mod
from . import report as report_mod
from .data import ingest_csv, synth_market
from .harness import build_agent, run_episode, write_episode
from .harness.config import config_help_text, merge_config
from .harness.episode import load_episode
from .harness.wire import AgentClient, SubprocessEndpoint, TcpEndpoint
from .masking import MaskLevel


def _load_store(spec: dict):
    if "synth" in spec:
        s = spec["synth"]
        return synth_market(int(s["seed"]), int(s["n_stocks"]), int(s["n_days"]),
                            s.get("regime", "default"))
    if "csv" in spec:
        c = spec["csv"]
        return ingest_csv(c["path"], calendar=c.get("calendar"), membership=c.get("membership"))
    raise SystemExit("data spec must contain either 'synth' or 'csv'")


def _resolve_window(store, w: dict) -> tuple[int, int]:
    import datetime as dt

    if "start_index" in w:
        return int(w["start_index"]), int(w["end_index"])
    start = store.calendar.index(dt.date.fromisoformat(w["start"]))
    end = store.calendar.index(dt.date.fromisoformat(w["end"]))
    return start, end


def _agent_label(spec: dict) -> str:
    kind = spec["kind"]
    if kind == "subprocess":
        return spec.get("name", "subprocess-agent")
    if kind == "tcp":
        return spec.get("name", "tcp-agent")
    params = spec.get("params") or {}
    label = kind
    if "k" in params:
        label += f"-k{params['k']}"
    return label


def _build_endpoint_or_agent(spec: dict):
    kind = spec["kind"]
    if kind == "subprocess":
        return SubprocessEndpoint(spec["argv"], name=spec.get("name"))
    if kind == "tcp":
        return TcpEndpoint(spec["host"], int(spec["port"]), name=spec.get("name"))
    return build_agent(kind, spec.get("params"))


def _run_cell(manifest_path: str, cell: dict) -> dict:
    """Worker entry: run one grid cell and write its episode directory."""
    manifest = json.loads(Path(manifest_path).read_text(encoding="utf-8"))
    store = _load_store(manifest["data"])
    config = merge_config(manifest.get("config"))
    out_dir = Path(cell["dir"])
    try:
        agent = _build_endpoint_or_agent(cell["agent"])
        result = run_episode(
            store,
            cell["mode"],
            cell["level"],
            (cell["start"], cell["end"]),
            agent,
            seed=cell["seed"],
            config=config,
            agent_name=cell["agent_label"],
        )
        write_episode(result, out_dir)
        panel = metrics_mod.compute_panel(result)
        metrics_mod.write_panel(panel, out_dir / "panel.json")
        att = attr_mod.attribute_episode(result, store)
        attr_mod.write_attribution(att, out_dir / "attribution.json", out_dir / "attribution.csv")
        return {"cell": cell["id"], "status": "ok"}
    except Exception as e:  # noqa: BLE001 - per-cell failures are recorded, not fatal
        return {"cell": cell["id"], "status": "failed", "error": repr(e)}


def cmd_run(args) -> int:
    manifest = json.loads(Path(args.manifest).read_text(encoding="utf-8"))
    store = _load_store(manifest["data"])
    config = merge_config(manifest.get("config"))
    root = Path(manifest["output_root"])
    episodes = root / "episodes"
    episodes.mkdir(parents=True, exist_ok=True)

    grid = manifest["grid"]
    cells = []
    for mode in grid["modes"]:
        for level in grid["levels"]:
            MaskLevel(level)
            for wi, w in enumerate(grid["windows"]):
                start, end = _resolve_window(store, w)
                for seed in grid["seeds"]:
                    for agent_spec in grid["agents"]:
                        label = _agent_label(agent_spec)
                        cell_id = f"{label}_{mode}_{level}_w{wi}_s{seed}"
                        cells.append({
                            "id": cell_id,
                            "dir": str(episodes / cell_id),
                            "mode": mode,
                            "level": level,
                            "start": start,
                            "end": end,
                            "seed": int(seed),
                            "agent": agent_spec,
                            "agent_label": label,
                        })

    todo = [c for c in cells if not (Path(c["dir"]) / "panel.json").exists()]
    print(f"{len(cells)} cells, {len(cells) - len(todo)} already complete, {len(todo)} to run")
    statuses = {c["id"]: "cached" for c in cells if c not in todo}
    workers = int(config["workers"])
    if workers > 1 and len(todo) > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            for res in pool.map(_run_cell, [args.manifest] * len(todo), todo):
                statuses[res["cell"]] = res.get("error", res["status"])
                print(f"  {res['cell']}: {res['status']}")
    else:
        for cell in todo:
            res = _run_cell(args.manifest, cell)
            statuses[res["cell"]] = res.get("error", res["status"])
            print(f"  {res['cell']}: {res['status']}")

    summary = _summarize(episodes, config)
    (root / "summary.json").write_text(json.dumps(summary, indent=2, sort_keys=True) + "\n",
                                       encoding="utf-8")
    report_mod.write_rows_csv(summary["rows"], root / "summary.csv")
    report_mod.write_rows_csv(summary["cells"], root / "cells.csv")
    failed = [cid for cid, s in statuses.items() if s not in ("ok", "cached")]
    if failed:
        print(f"FAILED cells: {failed}", file=sys.stderr)
        return 1
    return 0


def _summarize(episodes_root, config) -> dict:
    cells = report_mod.scan_cells(episodes_root)
    rows = report_mod.build_leaderboard(cells, config["benchmark"])
    return {"rows": rows, "cells": report_mod.cell_rows(cells), "n_cells": len(cells)}


def cmd_synth(args) -> int:
    store = synth_market(args.seed, args.n_stocks, args.n_days, args.regime)
    out = Path(args.out)
    out.parent.mkdir(parents=True, exist_ok=True)
    with open(out, "w", encoding="utf-8") as fh:
        fh.write("ticker,date,open,high,low,close,volume,amount\n")
        for t in store.tickers:
            s = store.series(t)
            for i, didx in enumerate(s.day_idx):
                d = store.calendar.date(int(didx)).isoformat()
                fh.write(f"{t},{d},{s.open[i]},{s.high[i]},{s.low[i]},{s.close[i]},"
                         f"{s.volume[i]},{s.amount[i]}\n")
    print(f"wrote {out} ({len(store.tickers)} tickers x {len(store.calendar)} days)")
    return 0


def cmd_ingest(args) -> int:
    store = ingest_csv(args.csv, calendar=args.calendar, membership=args.membership)
    print(f"ok: {len(store.tickers)} tickers, {len(store.calendar)} trading days, "
          f"span {store.calendar.date(0)} .. {store.calendar.date(len(store.calendar) - 1)}")
    return 0


def cmd_metrics(args) -> int:
    ep = load_episode(args.episode)
    panel = metrics_mod.compute_panel(ep)
    out = Path(args.episode) / "panel.json"
    metrics_mod.write_panel(panel, out)
    print(json.dumps(panel.to_json(), indent=2, sort_keys=True))
    return 0


def cmd_attribute(args) -> int:
    manifest = json.loads(Path(args.data).read_text(encoding="utf-8"))
    store = _load_store(manifest["data"] if "data" in manifest else manifest)
    ep = load_episode(args.episode)
    att = attr_mod.attribute_episode(ep, store)
    out_dir = Path(args.episode)
    attr_mod.write_attribution(att, out_dir / "attribution.json", out_dir / "attribution.csv")
    print(json.dumps({k: v for k, v in att.to_json().items() if k != "days"}, indent=2, sort_keys=True))
    return 0


def cmd_report(args) -> int:
    missing = report_mod.missing_panels(args.episodes)
    cells = report_mod.scan_cells(args.episodes)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    leaderboard = report_mod.build_leaderboard(cells, args.benchmark_label)
    report_mod.write_rows_csv(leaderboard, out / "leaderboard.csv")
    (out / "leaderboard.json").write_text(
        json.dumps(leaderboard, indent=2, sort_keys=True) + "\n", encoding="utf-8")
    att_table = report_mod.build_attribution_table(cells)
    report_mod.write_rows_csv(att_table, out / "attribution_table.csv")
    report_mod.write_equity_curves(cells, out / "equity_curves.csv")
    print(f"wrote leaderboard ({len(leaderboard)} rows) and attribution table "
          f"({len(att_table)} rows) to {out}")
    if missing:
        print(f"episodes without panels: {missing}", file=sys.stderr)
        return 1
    return 0


def cmd_probe_gen(args) -> int:
    manifest = json.loads(Path(args.data).read_text(encoding="utf-8"))
    store = _load_store(manifest["data"] if "data" in manifest else manifest)
    probes = probe_mod.generate_probes(store, args.n, args.seed, n_windows=args.windows)
    probe_mod.write_probe_set(probes, args.out)
    print(f"wrote {len(probes)} probes to {args.out}")
    return 0


def cmd_probe_score(args) -> int:
    manifest = json.loads(Path(args.data).read_text(encoding="utf-8"))
    store = _load_store(manifest["data"] if "data" in manifest else manifest)
    gold = probe_mod.load_gold(args.gold)
    answers = probe_mod.load_answers(args.answers)
    score = probe_mod.score_answers(gold, answers, store)
    out = json.dumps(score.to_json(), indent=2, sort_keys=True)
    if args.out:
        Path(args.out).write_text(out + "\n", encoding="utf-8")
    print(out)
    return 0


def cmd_probe_baseline(args) -> int:
    manifest = json.loads(Path(args.data).read_text(encoding="utf-8"))
    store = _load_store(manifest["data"] if "data" in manifest else manifest)
    score = probe_mod.random_baseline(store, args.n, args.trials, args.seed)
    out = json.dumps(score.to_json(), indent=2, sort_keys=True)
    if args.out:
        Path(args.out).write_text(out + "\n", encoding="utf-8")
    print(out)
    return 0


def cmd_serve_agent_stdio(args) -> int:
    params = json.loads(args.params) if args.params else {}
    agent = build_agent(args.strategy, params)
    AgentClient(agent).serve_forever()
    return 0


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(
        prog="masktrade",
        description="leakage-controlled trading-agent evaluation",
        epilog=config_help_text(),
        formatter_class=argparse.RawDescriptionHelpFormatter,
    )
    sub = p.add_subparsers(dest="command", required=True)

    s = sub.add_parser("synth", help="write a synthetic bar CSV")
    s.add_argument("--seed", type=int, required=True)
    s.add_argument("--n-stocks", type=int, required=True)
    s.add_argument("--n-days", type=int, required=True)
    s.add_argument("--regime", default="default")
    s.add_argument("--out", required=True)
    s.set_defaults(func=cmd_synth)

    s = sub.add_parser("ingest", help="validate a bar CSV")
    s.add_argument("csv")
    s.add_argument("--calendar")
    s.add_argument("--membership")
    s.set_defaults(func=cmd_ingest)

    s = sub.add_parser("run", help="run a manifest grid of episodes")
    s.add_argument("manifest")
    s.set_defaults(func=cmd_run)

    s = sub.add_parser("metrics", help="recompute the panel for one episode dir")
    s.add_argument("episode")
    s.set_defaults(func=cmd_metrics)

    s = sub.add_parser("attribute", help="recompute attribution for one episode dir")
    s.add_argument("episode")
    s.add_argument("--data", required=True, help="manifest or data spec JSON for the store")
    s.set_defaults(func=cmd_attribute)

    s = sub.add_parser("report", help="assemble leaderboard files from episodes")
    s.add_argument("episodes")
    s.add_argument("--out", required=True)
    s.add_argument("--benchmark-label", default="CSI300")
    s.set_defaults(func=cmd_report)

    s = sub.add_parser("probe-gen", help="generate masked de-anonymization probes")
    s.add_argument("--data", required=True)
    s.add_argument("--n", type=int, default=200)
    s.add_argument("--seed", type=int, default=0)
    s.add_argument("--windows", type=int, default=5)
    s.add_argument("--out", required=True)
    s.set_defaults(func=cmd_probe_gen)

    s = sub.add_parser("probe-score", help="score an attacker answers.jsonl")
    s.add_argument("--data", required=True)
    s.add_argument("--gold", required=True)
    s.add_argument("--answers", required=True)
    s.add_argument("--out")
    s.set_defaults(func=cmd_probe_score)

    s = sub.add_parser("probe-baseline", help="Monte-Carlo uniform-attacker baseline")
    s.add_argument("--data", required=True)
    s.add_argument("--n", type=int, default=200)
    s.add_argument("--trials", type=int, default=50)
    s.add_argument("--seed", type=int, default=0)
    s.add_argument("--out")
    s.set_defaults(func=cmd_probe_baseline)

    s = sub.add_parser("serve-agent-stdio", help="run a scripted agent over stdio")
    s.add_argument("--strategy", required=True)
    s.add_argument("--params", help="JSON object of strategy parameters")
    s.set_defaults(func=cmd_serve_agent_stdio)

    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
