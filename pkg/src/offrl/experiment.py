"""Experiment grid runner and report emission.

A grid config names a scenario, a list of estimators or optimizers with their
settings, sample sizes and a seed count. Every (method, n, seed) cell draws
its data from a seed hashed out of the cell key, so results do not depend on
how cells are scheduled across workers.
"""

from __future__ import annotations

import csv
import hashlib
import json
import math
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Optional

import numpy as np

from . import ope, opt
from .classes import FeatureMap, span_features
from .coverage import c_inf, chi_sq_coverage
from .data import sample_trajectories, sample_tuples
from .mdp import (
    StationaryPolicy,
    enumerate_deterministic,
    greedy,
    occupancy,
    policy_return,
    solve_q,
    truncated_return,
)
from .scenarios import Scenario, build_scenario
from .selection import bvft_tournament

COLUMNS = (
    "scenario", "estimator", "n", "seed", "point", "lower", "upper", "truth",
    "abs_error", "j_cp", "gap", "c_inf", "chi_sq", "error_code",
)
FLOAT_COLUMNS = ("point", "lower", "upper", "truth", "abs_error", "j_cp", "gap", "c_inf", "chi_sq")
SELECTORS = ("bvft",)


@dataclass
class ExperimentConfig:
    scenario: str
    estimators: list  # [{"id": "fqe", "K": 150, ...}, ...]
    n_grid: list
    seeds: int = 1
    master_seed: int = 0
    delta: float = 0.05
    scenario_params: dict = field(default_factory=dict)
    target: Optional[str] = None
    output: Optional[str] = None
    format: str = "csv"

    def __post_init__(self):
        if not self.estimators:
            raise ValueError("config needs at least one estimator")
        if self.seeds < 1:
            raise ValueError("seeds must be >= 1")
        self.estimators = [{"id": e} if isinstance(e, str) else dict(e) for e in self.estimators]
        known = set(ope.ESTIMATORS) | set(opt.OPTIMIZERS) | set(SELECTORS)
        for e in self.estimators:
            if e.get("id") not in known:
                raise ValueError(f"unknown estimator {e.get('id')!r}")
        if self.format not in ("csv", "json"):
            raise ValueError("format must be csv or json")

    @classmethod
    def from_dict(cls, d: dict) -> "ExperimentConfig":
        d = dict(d)
        d.pop("name", None)
        d.pop("description", None)
        return cls(**d)

    @classmethod
    def load(cls, path) -> "ExperimentConfig":
        return cls.from_dict(json.loads(Path(path).read_text()))

    def to_dict(self) -> dict:
        return asdict(self)


def label(est: dict) -> str:
    return est.get("name", est["id"])


def cell_seed(master_seed: int, scenario: str, estimator: str, n: int, seed_index: int) -> int:
    key = json.dumps([master_seed, scenario, estimator, n, seed_index]).encode()
    return int.from_bytes(hashlib.sha256(key).digest()[:8], "big") >> 1


# ---------------------------------------------------------------------------
# one cell


def _target(sc: Scenario, name: Optional[str]) -> StationaryPolicy:
    if name is not None:
        return sc.targets[name]
    return sc.targets.get("pi") or next(iter(sc.targets.values()))


def _comparator(sc: Scenario):
    return sc.targets["cp"] if "cp" in sc.targets else greedy(solve_q(sc.mdp))


def _features(sc: Scenario, est: dict) -> FeatureMap:
    obj = sc.classes[est.get("class", "tabular")]
    return obj if isinstance(obj, FeatureMap) else span_features(obj)


def _policies(sc: Scenario, est: dict) -> list:
    names = est.get("policies")
    if names is None:
        if sc.mdp.n_states ** sc.mdp.n_actions <= 256 and "cp" not in sc.targets:
            return enumerate_deterministic(sc.mdp.n_states, sc.mdp.n_actions)
        return [p for k, p in sc.targets.items() if k != "cp"]
    return [sc.targets[k] for k in names]


def _run_ope(sc: Scenario, est: dict, n: int, seed: int, cfg: ExperimentConfig) -> dict:
    pi = _target(sc, cfg.target)
    mdp, d0 = sc.mdp, sc.mdp.init_dist
    kind = est["id"]
    d_D = sc.data_dist()
    row = {"c_inf": c_inf(occupancy(mdp, pi), d_D), "chi_sq": chi_sq_coverage(occupancy(mdp, pi), d_D)}
    if kind in ("is", "wis"):
        H = est.get("H", sc.horizon or 10)
        td = sample_trajectories(mdp, sc.behavior_policy, n, H, seed)
        e = ope.is_estimate(td, pi, mode="plain" if kind == "is" else "weighted")
        truth = truncated_return(mdp, pi, H)
    else:
        tuples = sample_tuples(mdp, d_D, n, seed)
        truth = policy_return(mdp, pi)
        cls = sc.classes.get(est.get("class", "tabular"))
        if kind == "fqe":
            e = ope.fqe(cls, tuples, pi, est.get("K", 100), est.get("ridge", 0.0), d0)[1]
        elif kind == "brm":
            e = ope.brm(cls, tuples, pi, d0=d0, ridge=est.get("ridge", 0.0))[1]
        elif kind == "lstdq":
            e = ope.lstdq(_features(sc, est), tuples, pi, est.get("ridge", 0.0), d0)[1]
        elif kind == "mql":
            e = ope.mql(cls, sc.classes.get(est.get("weights", est.get("class", "tabular"))), tuples, pi, d0)[1]
        elif kind == "mwl":
            e = ope.mwl(sc.classes.get(est.get("weights", est.get("class", "tabular"))), cls, tuples, pi, d0)[1]
        else:
            e = ope.mle_estimate(tuples, pi, d0)
    row.update(point=e.point, lower=e.lower, upper=e.upper, truth=truth)
    return row


def _run_opt(sc: Scenario, est: dict, n: int, seed: int, cfg: ExperimentConfig) -> dict:
    mdp, d0 = sc.mdp, sc.mdp.init_dist
    kind = est["id"]
    cp = _comparator(sc)
    tuples = sample_tuples(mdp, sc.data_dist(), n, seed)
    cls = sc.classes.get(est.get("class", "finite" if kind == "vs_pess" else "tabular"))
    common = dict(d0=d0, mdp=mdp, comparator=cp)
    if kind == "fqi":
        res = opt.fqi(cls, tuples, est.get("K", 100), est.get("ridge", 1e-8), **common)
    elif kind == "fpi":
        res = opt.fpi(cls, tuples, est.get("K", 10), fqe_iters=est.get("fqe_iters", 100),
                      ridge=est.get("ridge", 1e-8), **common)
    elif kind == "vs_pess":
        res = opt.pessimistic_search(_policies(sc, est), cls, tuples, cfg.delta, c=est.get("c", 2.0), **common)
    elif kind == "pspi":
        res = opt.pspi(cls, tuples, est.get("K", 10), eta=est.get("eta"), delta=cfg.delta, **common)
    elif kind == "pevi":
        res = opt.pevi(_features(sc, est), tuples, est.get("K", 20), est.get("beta"), est.get("ridge", 1.0),
                       cfg.delta, est.get("c_beta", 1.0), **common)
    else:
        relative = kind == "model_pess_rel"
        res = opt.model_pessimism(sc.classes["models"], _policies(sc, est), tuples, cfg.delta, reward=mdp.reward,
                                  mode="relative" if relative else "absolute",
                                  pi_ref=sc.behavior_policy if relative else None, c=est.get("c", 2.0), **common)
    horizon = est.get("K", 20) if kind == "pevi" else None
    j_cp = policy_return(mdp, cp) if horizon is None else truncated_return(mdp, cp, horizon)
    truth = j_cp - res.truth_gap
    if kind == "model_pess_rel":
        truth -= policy_return(mdp, sc.behavior_policy)  # the estimate is a worst-case improvement
    d_cp = occupancy(mdp, cp)
    return {"point": res.value_estimate.point, "lower": res.value_estimate.lower, "upper": res.value_estimate.upper,
            "truth": truth, "j_cp": j_cp, "gap": res.truth_gap,
            "c_inf": c_inf(d_cp, sc.data_dist()), "chi_sq": chi_sq_coverage(d_cp, sc.data_dist())}


def _run_select(sc: Scenario, est: dict, n: int, seed: int, cfg: ExperimentConfig) -> dict:
    pi = _target(sc, cfg.target)
    cands = sc.classes["candidates"]
    tuples = sample_tuples(sc.mdp, sc.data_dist(), n, seed)
    v = sc.mdp.v_max
    rep = bvft_tournament(cands, tuples, pi, est.get("eps", v / 20), v)
    d0 = sc.mdp.init_dist
    return {"point": ope.initial_value(cands[rep.winner_index], pi, d0), "truth": policy_return(sc.mdp, pi)}


_SCENARIO_CACHE: dict = {}


def _scenario(cfg: ExperimentConfig) -> Scenario:
    key = json.dumps([cfg.scenario, cfg.scenario_params], sort_keys=True)
    if key not in _SCENARIO_CACHE:
        _SCENARIO_CACHE[key] = build_scenario(cfg.scenario, cfg.scenario_params)
    return _SCENARIO_CACHE[key]


def run_cell(cfg: ExperimentConfig, est_index: int, n: int, seed_index: int) -> dict:
    est = cfg.estimators[est_index]
    row = dict.fromkeys(COLUMNS)
    row.update(scenario=cfg.scenario, estimator=label(est), n=n, seed=seed_index, error_code="")
    seed = cell_seed(cfg.master_seed, cfg.scenario, label(est), n, seed_index)
    try:
        sc = _scenario(cfg)
        kind = est["id"]
        if kind in ope.ESTIMATORS:
            out = _run_ope(sc, est, n, seed, cfg)
        elif kind in SELECTORS:
            out = _run_select(sc, est, n, seed, cfg)
        else:
            out = _run_opt(sc, est, n, seed, cfg)
        row.update(out)
        if row["point"] is not None and row["truth"] is not None:
            row["abs_error"] = abs(row["point"] - row["truth"])
    except Exception as exc:  # failure-tolerant: record and continue
        row["error_code"] = type(exc).__name__
    for k in FLOAT_COLUMNS:
        if row[k] is not None:
            row[k] = float(row[k])
    return row


def _cell_star(args):
    return run_cell(*args)


def run_experiment(cfg: ExperimentConfig, workers: int = 1) -> list:
    """Run every cell; rows come back ordered by (estimator, n, seed) whatever the schedule."""
    cells = [(cfg, i, n, s) for i in range(len(cfg.estimators)) for n in cfg.n_grid for s in range(cfg.seeds)]
    if workers <= 1:
        rows = [run_cell(*c) for c in cells]
    else:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            rows = list(pool.map(_cell_star, cells, chunksize=max(1, len(cells) // (4 * workers))))
    return rows


# ---------------------------------------------------------------------------
# reports


def _fmt(x) -> str:
    if x is None or (isinstance(x, float) and math.isnan(x)):
        return ""
    if isinstance(x, float):
        return f"{x:.12g}"
    return str(x)


def _json_value(x):
    if isinstance(x, float):
        if math.isnan(x):
            return None
        return float(f"{x:.12g}")
    return x


def summarize(rows: list) -> list:
    """Median absolute error per (scenario, estimator, n) over rows without errors."""
    groups: dict = {}
    for r in rows:
        groups.setdefault((r["scenario"], r["estimator"], int(r["n"])), []).append(r)
    out = []
    for (sc, est, n), rs in groups.items():
        errs = [float(r["abs_error"]) for r in rs if not r["error_code"] and r["abs_error"] not in (None, "")]
        out.append({"scenario": sc, "estimator": est, "n": n, "cells": len(rs),
                    "errors": sum(1 for r in rs if r["error_code"]),
                    "median_abs_error": float(np.median(errs)) if errs else None})
    return out


def summary_path(path) -> Path:
    p = Path(path)
    return p.with_name(p.stem + ".summary" + p.suffix)


def _write(rows: list, columns, fmt: str, path: Path) -> None:
    if fmt == "csv":
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(columns)
            for r in rows:
                w.writerow([_fmt(r.get(c)) for c in columns])
    elif fmt == "json":
        payload = {"columns": list(columns), "rows": [[_json_value(r.get(c)) for c in columns] for r in rows]}
        path.write_text(json.dumps(payload, indent=1) + "\n")
    else:
        raise ValueError("format must be csv or json")


def emit_report(rows: list, fmt: str, path) -> Path:
    """Write the table with a fixed column order and a sibling summary file; returns the summary path."""
    path = Path(path)
    if path.parent and not path.parent.exists():
        path.parent.mkdir(parents=True, exist_ok=True)
    if not os.access(path.parent, os.W_OK):
        raise PermissionError(f"cannot write to {path.parent}")
    _write(rows, COLUMNS, fmt, path)
    spath = summary_path(path)
    _write(summarize(rows), ("scenario", "estimator", "n", "cells", "errors", "median_abs_error"), fmt, spath)
    return spath


def read_report(path) -> list:
    """Rows of a CSV or JSON report with numeric columns parsed back to floats (missing -> None)."""
    path = Path(path)
    if path.suffix == ".json":
        payload = json.loads(path.read_text())
        rows = [dict(zip(payload["columns"], r)) for r in payload["rows"]]
    else:
        with open(path, newline="") as fh:
            rows = list(csv.DictReader(fh))
        for r in rows:
            for k, v in r.items():
                if k in FLOAT_COLUMNS or k in ("median_abs_error",):
                    r[k] = float(v) if v != "" else None
                elif k in ("n", "seed", "cells", "errors"):
                    r[k] = int(v)
    return rows
