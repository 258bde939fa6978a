"""Command line: ``offrl scenario``, ``offrl run``, ``offrl report``."""

from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

from .checks import run_check
from .experiment import ExperimentConfig, emit_report, read_report, run_experiment, summarize
from .mdp import policy_return
from .scenarios import BUILDERS, build_scenario


def _parse_value(text: str):
    try:
        return json.loads(text)
    except json.JSONDecodeError:
        return text


def cmd_scenario(args) -> int:
    params = dict(p.split("=", 1) for p in args.param)
    sc = build_scenario(args.name, {k: _parse_value(v) for k, v in params.items()})
    info = {
        "name": sc.name,
        "n_states": sc.mdp.n_states,
        "n_actions": sc.mdp.n_actions,
        "gamma": sc.mdp.gamma,
        "v_max": sc.mdp.v_max,
        "targets": {k: policy_return(sc.mdp, p) for k, p in sc.targets.items()},
        "classes": sorted(sc.classes),
        "notes": sc.notes,
    }
    print(json.dumps(info, indent=1))
    if args.out:
        sc.mdp.save(args.out)
    return 0


def cmd_run(args) -> int:
    raw = json.loads(Path(args.config).read_text())
    if "check" in raw:
        params = dict(raw.get("params", {}))
        if args.workers > 1 and "workers" in params:
            params["workers"] = args.workers
        res = run_check(raw["check"], **params)
        print(res.line())
        if args.out:
            Path(args.out).write_text(json.dumps(res.to_dict(), indent=1) + "\n")
        return 0 if res.passed else 1
    cfg = ExperimentConfig.from_dict(raw)
    if args.seed is not None:
        cfg.master_seed = args.seed
    fmt = args.format or cfg.format
    out = args.out or cfg.output or f"results.{fmt}"
    rows = run_experiment(cfg, workers=args.workers or 1)
    spath = emit_report(rows, fmt, out)
    failed = sum(1 for r in rows if r["error_code"])
    print(f"{len(rows)} rows ({failed} errors) -> {out}; summary -> {spath}")
    return 0


def cmd_report(args) -> int:
    rows = read_report(args.input)
    summary = summarize(rows)
    if args.format == "json":
        print(json.dumps(summary, indent=1))
        return 0
    print(f"{'scenario':<12}{'estimator':<16}{'n':>8}{'cells':>7}{'errors':>8}{'median|err|':>14}")
    for s in summary:
        med = "" if s["median_abs_error"] is None else f"{s['median_abs_error']:.6g}"
        print(f"{s['scenario']:<12}{s['estimator']:<16}{s['n']:>8}{s['cells']:>7}{s['errors']:>8}{med:>14}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="offrl", description="Offline RL estimator and optimizer workbench")
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True)

    s = sub.add_parser("scenario", help="build a scenario and print its summary")
    s.add_argument("name", choices=sorted(BUILDERS))
    s.add_argument("--param", action="append", default=[], metavar="KEY=VALUE", help="builder argument (JSON value)")
    s.add_argument("--out", help="save the MDP as JSON")
    s.set_defaults(func=cmd_scenario)

    r = sub.add_parser("run", help="run a grid or acceptance-check config")
    r.add_argument("--config", required=True)
    r.add_argument("--seed", type=int, help="override the master seed")
    r.add_argument("--out")
    r.add_argument("--format", choices=("csv", "json"))
    r.add_argument("--workers", type=int, default=1)
    r.set_defaults(func=cmd_run)

    q = sub.add_parser("report", help="summarize a results file")
    q.add_argument("--in", dest="input", required=True)
    q.add_argument("--format", choices=("table", "json"), default="table")
    q.set_defaults(func=cmd_report)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING)
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
