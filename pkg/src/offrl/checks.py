"""Acceptance checks, one function per criterion.

Each check returns a CheckResult whose ``passed`` flag includes the runtime
budget. Checks use exact oracles from ``mdp`` for every truth they compare
against.
"""

from __future__ import annotations

import json
import math
import time
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable

import numpy as np

from . import ope, opt
from .classes import FeatureMap, FiniteClass, LinearClass, check_completeness, gen_low_rank_mdp
from .coverage import (
    c_avg,
    c_inf,
    c_sq,
    chi_sq_coverage,
    effective_weight,
    linear_avg_bound,
    spanner_design,
)
from .data import sample_trajectories, sample_tuples
from .experiment import ExperimentConfig, run_experiment
from .mdp import (
    NonstationaryPolicy,
    OccupancyMeasure,
    StationaryPolicy,
    TabularMDP,
    bellman_backup,
    enumerate_deterministic,
    finite_horizon_values,
    greedy,
    occupancy,
    per_step_occupancy,
    policy_return,
    random_mdp,
    random_policy,
    solve_q,
    state_values,
    truncated_return,
)
from .scenarios import bandit, divergence, loop, random_scenario, tree, tree_minimax_coverage
from .selection import bvft_tournament, cell_bound

CONFIG_DIR = Path(__file__).resolve().parents[2] / "configs"


@dataclass
class CheckResult:
    criterion: int
    name: str
    passed: bool
    metrics: dict = field(default_factory=dict)
    detail: str = ""
    runtime: float = 0.0
    budget: float = math.inf

    def line(self) -> str:
        status = "PASS" if self.passed else "FAIL"
        return f"criterion {self.criterion:2d} [{status}] {self.name}: {self.detail} ({self.runtime:.1f}s of {self.budget:g}s)"

    def to_dict(self) -> dict:
        return {"criterion": self.criterion, "name": self.name, "passed": self.passed, "detail": self.detail,
                "runtime": self.runtime, "budget": self.budget, "metrics": _jsonable(self.metrics)}


def _jsonable(x):
    if isinstance(x, dict):
        return {str(k): _jsonable(v) for k, v in x.items()}
    if isinstance(x, (list, tuple)):
        return [_jsonable(v) for v in x]
    if isinstance(x, np.ndarray):
        return _jsonable(x.tolist())
    if isinstance(x, (np.floating, np.integer, np.bool_)):
        return x.item()
    return x


def _timed(criterion: int, name: str, budget: float):
    def wrap(fn: Callable[..., tuple]):
        def run(**kw) -> CheckResult:
            t0 = time.perf_counter()
            ok, metrics, detail = fn(**kw)
            dt = time.perf_counter() - t0
            return CheckResult(criterion, name, bool(ok) and dt < budget, metrics, detail, dt, budget)

        run.__name__ = fn.__name__
        run.__doc__ = fn.__doc__
        return run

    return wrap


def _instance(rng, S=None, A=None, gamma=None):
    S = S or int(rng.integers(2, 7))
    A = A or int(rng.integers(2, 4))
    gamma = gamma if gamma is not None else float(rng.uniform(0.5, 0.95))
    return random_mdp(S, A, gamma, rng), random_policy(S, A, rng)


# ---------------------------------------------------------------------------
# 1: exact identities


@_timed(1, "exact identities", 10.0)
def criterion_1(instances: int = 60, seed: int = 1, tol: float = 1e-9):
    rng = np.random.default_rng(seed)
    worst = dict.fromkeys(
        ("telescoping", "performance_difference", "finite_horizon", "loss_decomposition", "bellman_flow",
         "linf_translation", "norm_translation"), 0.0)
    for _ in range(instances):
        mdp, pi = _instance(rng)
        S, A, g = mdp.n_states, mdp.n_actions, mdp.gamma
        f = rng.normal(size=(S, A)) * mdp.v_max
        d_pi = occupancy(mdp, pi).dist
        J = policy_return(mdp, pi)
        Tf = bellman_backup(mdp, f, pi)
        # value of f minus true value equals the discounted average Bellman error
        lhs = mdp.init_dist @ state_values(f, pi) - J
        worst["telescoping"] = max(worst["telescoping"], abs(lhs - (d_pi * (f - Tf)).sum() / (1 - g)))

        pi2 = random_policy(S, A, rng)
        d_pi2 = occupancy(mdp, pi2).dist
        adv = (d_pi2.sum(1) * (state_values(f, pi2) - state_values(f, pi))).sum()
        rhs = (adv + (d_pi2 * (Tf - f)).sum() + (d_pi * (f - Tf)).sum()) / (1 - g)
        worst["performance_difference"] = max(worst["performance_difference"],
                                              abs(policy_return(mdp, pi2) - J - rhs))

        K = int(rng.integers(1, 8))
        steps = tuple(random_policy(S, A, rng) for _ in range(K))  # steps[k-1] = pi_k
        ns = NonstationaryPolicy(steps)
        fs = [np.zeros((S, A))] + [rng.normal(size=(S, A)) for _ in range(K)]  # fs[k] = f_k
        dts = per_step_occupancy(mdp, ns, K)
        lhs = mdp.init_dist @ state_values(fs[K], steps[K - 1]) - truncated_return(mdp, ns, K)
        rhs = 0.0
        for t in range(K):
            k = K - t
            prev = bellman_backup(mdp, fs[k - 1], steps[k - 2]) if k >= 2 else mdp.reward
            rhs += g**t * (dts[t] * (fs[k] - prev)).sum()
        worst["finite_horizon"] = max(worst["finite_horizon"], abs(lhs - rhs))

        d_D = rng.dirichlet(np.ones(S * A)).reshape(S, A)
        loss = ope.td_loss_population(mdp, d_D, f, f, pi)
        split = ope.bellman_error_population(mdp, d_D, f, pi) + ope.td_loss_population(mdp, d_D, Tf, f, pi)
        worst["loss_decomposition"] = max(worst["loss_decomposition"], abs(loss - split) / max(1.0, loss))

        flow = (1 - g) * mdp.init_dist[:, None] * pi.probs + g * np.einsum(
            "sa,sap->p", d_pi, mdp.transition)[:, None] * pi.probs
        worst["bellman_flow"] = max(worst["bellman_flow"], float(np.abs(flow - d_pi).max()))

        q = solve_q(mdp, pi)
        excess = np.abs(f - q).max() - np.abs(f - Tf).max() / (1 - g)
        worst["linf_translation"] = max(worst["linf_translation"], max(0.0, excess))

        xi = rng.normal(size=(S, A))
        mu = rng.dirichlet(np.ones(S * A)).reshape(S, A)
        for p in (1, 2, 3):
            excess = (d_pi * np.abs(xi) ** p).sum() - c_inf(d_pi, mu) * (mu * np.abs(xi) ** p).sum()
            worst["norm_translation"] = max(worst["norm_translation"], max(0.0, excess))
    ok = all(v <= tol for v in worst.values())
    return ok, {"instances": instances, "worst": worst}, f"{instances} instances, max violation {max(worst.values()):.2e}"


# ---------------------------------------------------------------------------
# 2: curse of horizon


@_timed(2, "curse of horizon", 60.0)
def criterion_2(n: int = 100_000, horizons=tuple(range(2, 11)), gamma: float = 0.9, seed: int = 2):
    """Least-squares slope of log Var(IS) against H, in units of log 2."""
    logs = []
    for H in horizons:
        sc = loop(H=H, gamma=gamma)
        td = sample_trajectories(sc.mdp, sc.behavior_policy, n, H, seed + H)
        est = ope.is_estimate(td, sc.targets["always_a1"])
        logs.append(math.log(est.diagnostics["is_var"]))
    slope = float(np.polyfit(np.array(horizons, float), np.array(logs), 1)[0]) / math.log(2)
    ok = 0.5 <= slope <= 1.0
    return ok, {"slope_over_log2": slope, "log_var": logs}, f"slope = {slope:.4f} log 2 per step (band [0.5, 1.0])"


# ---------------------------------------------------------------------------
# 3 and 8: sqrt-n consistency


def consistency_config(estimators=("fqe", "brm", "lstdq", "mql", "mwl", "mle"), seeds: int = 30,
                       n_grid=(2500, 40000)) -> ExperimentConfig:
    ests = [{"id": "fqe", "K": 150} if e == "fqe" else {"id": e} for e in estimators]
    return ExperimentConfig("random", ests, list(n_grid), seeds, master_seed=3,
                            scenario_params={"n_states": 4, "n_actions": 2, "gamma": 0.9, "seed": 0})


def _rate_ratios(cfg: ExperimentConfig, workers: int) -> dict:
    rows = run_experiment(cfg, workers)
    lo, hi = cfg.n_grid
    out = {}
    for e in cfg.estimators:
        name = e.get("name", e["id"])
        med = {n: float(np.median([r["abs_error"] for r in rows if r["estimator"] == name and r["n"] == n]))
               for n in (lo, hi)}
        out[name] = med[hi] / med[lo]
    return out


@_timed(3, "sqrt-n consistency", 300.0)
def criterion_3(workers: int = 1):
    ratios = _rate_ratios(consistency_config(), workers)
    ok = all(r <= 0.6 for r in ratios.values())
    worst = max(ratios, key=ratios.get)
    return ok, {"ratios": ratios}, f"worst median-error ratio {ratios[worst]:.3f} ({worst}), need <= 0.6"


# ---------------------------------------------------------------------------
# 4: divergence


@_timed(4, "projected evaluation divergence", 1.0)
def criterion_4(gamma: float = 0.95, K: int = 50):
    sc = divergence(gamma)
    phi = sc.classes["features"]
    pi = sc.targets["pi"]
    iterates, est = ope.fqe_population(sc.classes["linear"], sc.mdp, pi, sc.behavior, K, f0=phi.features[..., 0])
    norms = est.diagnostics["sup_norm"]
    ratio = norms[K] / norms[0]
    predicted = (6 * gamma / 5) ** K
    realized = bool(np.allclose(sc.classes["linear"].project(solve_q(sc.mdp, pi), sc.behavior), 0.0, atol=1e-12))
    report = check_completeness(sc.classes["linear"], sc.classes["linear"], sc.mdp, pi)
    rel = abs(ratio / predicted - 1)
    ok = ratio >= 100 and rel <= 0.01 and report.realizable and realized
    return ok, {"ratio": ratio, "predicted": predicted, "relative_error": rel, "realizable": report.realizable,
                "complete": report.complete}, (
        f"sup-norm ratio {ratio:.2f} vs (6 gamma/5)^{K} = {predicted:.2f}, realizable={report.realizable}")


# ---------------------------------------------------------------------------
# 5: pessimism validity and the bandit trap


def covered_validity(seeds: int = 100, n: int = 2000, delta: float = 0.05, members: int = 30, seed: int = 50):
    """Fraction of seeds with the version-space lower bound below J(pi) on random covered instances."""
    hits = 0
    for i in range(seeds):
        rng = np.random.default_rng([seed, i])
        mdp, pi = _instance(rng, S=4, A=2, gamma=0.9)
        q = solve_q(mdp, pi)
        scale = rng.uniform(0.01, 0.5, size=(members, 1, 1)) * mdp.v_max
        F = FiniteClass(np.concatenate([q[None], q[None] + scale * rng.normal(size=(members,) + q.shape)]))
        d_D = OccupancyMeasure(np.full(q.shape, 1 / q.size))
        tuples = sample_tuples(mdp, d_D, n, int(rng.integers(2**31)))
        iv = ope.vs_interval(ope.version_space(F, tuples, pi, delta), mdp.init_dist)
        hits += iv.lower <= policy_return(mdp, pi) + 1e-12
    return hits


TRAP = dict(means=(0.5, 0.8, 0.7, 0.7, 0.7), behavior=(0.58, 0.36, 0.02, 0.02, 0.02), cp=1)


def bandit_trap(params: dict, n_grid=(60, 240), seeds: int = 100, delta: float = 0.05) -> dict:
    sc = bandit(**params)
    A = len(params["means"])
    arms = [sc.targets[f"arm_{a}"] for a in range(A)]
    cp = params["cp"]
    out = {}
    for n in n_grid:
        gp, gf, width = [], [], []
        for s in range(seeds):
            tuples = sample_tuples(sc.mdp, sc.data_dist(), n, 10_000 * n + s)
            res = opt.pessimistic_search(arms, sc.classes["finite"], tuples, delta, sc.mdp.init_dist,
                                         mdp=sc.mdp, comparator=arms[cp])
            iv = res.trace["intervals"][cp]
            gp.append(res.truth_gap)
            width.append(iv.point - iv.lower)
            gf.append(opt.fqi(sc.classes["tabular"], tuples, 1, ridge=1e-8, mdp=sc.mdp, comparator=arms[cp]).truth_gap)
        out[n] = {"pess_median_gap": float(np.median(gp)), "fqi_median_gap": float(np.median(gf)),
                  "cp_lcb_width": float(np.median(width)), "fqi_off_cp": float(np.mean(np.array(gf) > 1e-12))}
    return out


@_timed(5, "pessimism validity", 120.0)
def criterion_5(seeds: int = 100):
    hits = covered_validity(seeds)
    trap = bandit_trap(TRAP, seeds=seeds)
    lo, hi = trap[60], trap[240]
    trap_gap = 0.1
    clauses = {
        "covered_validity": hits >= 0.95 * seeds,
        "pess_within_lcb_width": all(t["pess_median_gap"] <= t["cp_lcb_width"] + 1e-12 for t in trap.values()),
        "pess_shrinks": lo["pess_median_gap"] > 0 and lo["pess_median_gap"] >= 1.5 * hi["pess_median_gap"],
        "fqi_stays_trapped": all(t["fqi_median_gap"] >= trap_gap - 1e-9 for t in trap.values()),
    }
    detail = (f"valid {hits}/{seeds}; pess median gap {lo['pess_median_gap']:.2f} -> {hi['pess_median_gap']:.2f}; "
              f"fqi median gap {lo['fqi_median_gap']:.2f} -> {hi['fqi_median_gap']:.2f}")
    return all(clauses.values()), {"valid_seeds": hits, "trap": trap, "clauses": clauses}, detail


# ---------------------------------------------------------------------------
# 6: PEVI


def pevi_seed(seed: int, n: int = 1000, K: int = 20, d: int = 2, S: int = 6, A: int = 2, gamma: float = 0.9):
    mdp, phi, _, _ = gen_low_rank_mdp(d, S, A, seed, gamma)
    d_D = occupancy(mdp, StationaryPolicy.uniform(S, A))
    tuples = sample_tuples(mdp, d_D, n, seed + 7919)
    cp = greedy(solve_q(mdp))
    res = opt.pevi(phi, tuples, K, d0=mdp.init_dist, mdp=mdp, comparator=cp)
    qs = finite_horizon_values(mdp, res.policy, K)
    pess = all((f <= q + 1e-9).all() for f, q in zip(res.trace["f_minus"], qs))
    bonus = res.trace["bonus"]
    rhs = 2 * sum(gamma**t * (dt * bonus).sum() for t, dt in enumerate(per_step_occupancy(mdp, cp, K)))
    return pess, res.truth_gap <= rhs + 1e-6, res.truth_gap, rhs


@_timed(6, "PEVI pessimism", 120.0)
def criterion_6(seeds: int = 100):
    pess, bound = 0, 0
    for s in range(seeds):
        p, b, _, _ = pevi_seed(s)
        pess += p
        bound += b
    ok = pess >= 0.95 * seeds and bound == seeds
    return ok, {"pointwise_pessimistic": pess, "bound_holds": bound}, (
        f"pointwise pessimism {pess}/{seeds}, suboptimality bound {bound}/{seeds}")


# ---------------------------------------------------------------------------
# 7: coverage algebra


@_timed(7, "coverage algebra", 60.0)
def criterion_7(instances: int = 100, seed: int = 7, tol: float = 1e-9):
    rng = np.random.default_rng(seed)
    order_viol = 0.0
    weight_gap = 0.0
    for _ in range(instances):
        mdp, pi = _instance(rng)
        S, A = mdp.n_states, mdp.n_actions
        d_D = rng.dirichlet(np.ones(S * A)).reshape(S, A)
        F = FiniteClass(rng.uniform(0, mdp.v_max, size=(5, S, A)))
        d_pi = occupancy(mdp, pi).dist
        ci, cs, ca, chi = c_inf(d_pi, d_D), c_sq(F, mdp, pi, d_D), c_avg(F, mdp, pi, d_D), chi_sq_coverage(d_pi, d_D)
        order_viol = max(order_viol, ca - cs, cs - ci, chi - ci)
        feats = FeatureMap(rng.normal(size=(S, A, min(3, S * A))))
        w = effective_weight(feats, mdp, pi, d_D)
        weight_gap = max(weight_gap, abs((d_D * w**2).sum() - linear_avg_bound(feats, d_pi, d_D)))
    tree_value = tree_minimax_coverage(tree(2, 3))
    sc_mdp, phi, _, _ = gen_low_rank_mdp(2, 6, 2, 0)
    pols = enumerate_deterministic(6, 2)
    design = spanner_design(sc_mdp, pols)
    design_worst = max(c_inf(occupancy(sc_mdp, p), design) for p in pols)
    clauses = {
        "ordering": order_viol <= tol,
        "tree": tree_value >= 8 - 1e-9,
        "low_rank_design": design_worst <= 2 * 2 + 1e-9,
        "effective_weight": weight_gap <= tol,
    }
    detail = (f"ordering slack {order_viol:.1e}; tree minimax {tree_value:g}; design max C {design_worst:.3f} <= 4; "
              f"weight identity gap {weight_gap:.1e}")
    return all(clauses.values()), {"order_violation": order_viol, "tree": tree_value, "design_worst": design_worst,
                                   "weight_gap": weight_gap, "clauses": clauses}, detail


# ---------------------------------------------------------------------------
# 8: weight/value identities


@_timed(8, "MWL/MQL identities", 30.0)
def criterion_8(instances: int = 50, seed: int = 8, tol: float = 1e-10, workers: int = 1, rate_seeds: int = 30):
    rng = np.random.default_rng(seed)
    worst_q, worst_w = 0.0, 0.0
    for _ in range(instances):
        mdp, pi = _instance(rng)
        S, A = mdp.n_states, mdp.n_actions
        d_D = rng.dirichlet(np.ones(S * A)).reshape(S, A)
        q = solve_q(mdp, pi)
        w_pi = occupancy(mdp, pi).dist / d_D
        for _ in range(5):
            w = rng.normal(size=(S, A))
            f = rng.normal(size=(S, A)) * mdp.v_max
            worst_q = max(worst_q, ope.mql_loss_population(mdp, d_D, w, q, pi))
            worst_w = max(worst_w, ope.mwl_loss_population(mdp, d_D, w_pi, f, pi))
    ratios = _rate_ratios(consistency_config(("mql", "mwl"), rate_seeds), workers)
    ok = worst_q <= tol and worst_w <= tol and all(r <= 0.6 for r in ratios.values())
    return ok, {"mql_max": worst_q, "mwl_max": worst_w, "ratios": ratios}, (
        f"max |L_q(w, Q^pi)| {worst_q:.1e}, max |L_w(w^pi, f)| {worst_w:.1e}, rate ratios "
        + ", ".join(f"{k} {v:.3f}" for k, v in ratios.items()))


# ---------------------------------------------------------------------------
# 9: BVFT


@_timed(9, "BVFT selection", 120.0)
def criterion_9(seeds: int = 100, n: int = 10_000):
    wins, bound_ok = 0, True
    for s in range(seeds):
        sc = random_scenario(seed=1000 + s)
        pi = sc.targets["pi"]
        v = sc.mdp.v_max
        eps = v / 20
        tuples = sample_tuples(sc.mdp, sc.data_dist(), n, s)
        rep = bvft_tournament(sc.classes["candidates"], tuples, pi, eps, v)
        wins += rep.winner_index == 0
        bound_ok &= bool((rep.partitions_used <= cell_bound(eps, v)).all())
    ok = wins >= 0.9 * seeds and bound_ok
    return ok, {"recovered": wins, "cell_bound_respected": bound_ok}, (
        f"planted Q^pi recovered {wins}/{seeds}, cell bound respected={bound_ok}")


# ---------------------------------------------------------------------------
# 10: relative pessimism


def contrast_instance(gamma: float = 0.9):
    """Start state with three actions leading to a rewarding or a dead absorbing state.

    Two candidate kernels agree on the data-covered action 0 and differ on the
    others; the reference policy always takes action 2.
    """
    def kernel(p_good):
        P = np.zeros((3, 3, 3))
        P[0, :, 1] = p_good
        P[0, :, 2] = 1 - np.asarray(p_good)
        P[1, :, 1] = 1.0
        P[2, :, 2] = 1.0
        return P

    models = [kernel([0.5, 1.0, 0.8]), kernel([0.5, 0.49, 0.0])]
    R = np.zeros((3, 3))
    R[1] = 1.0
    mdp = TabularMDP(models[0], R, gamma, np.array([1.0, 0.0, 0.0]))
    policies = [StationaryPolicy.constant(a, 3, 3) for a in range(3)]
    d_D = np.zeros((3, 3))
    d_D[0, 0] = 1.0
    return mdp, models, policies, policies[2], OccupancyMeasure(d_D)


def contrast_objectives(mdp: TabularMDP, models, policies, pi_ref):
    """Worst-case return and worst-case improvement over pi_ref, enumerated over all models."""
    J = np.array([[policy_return(mdp.replace(transition=P), p) for p in policies] for P in models])
    J_ref = np.array([policy_return(mdp.replace(transition=P), pi_ref) for P in models])
    return J.min(axis=0), (J - J_ref[:, None]).min(axis=0)


@_timed(10, "relative pessimism", 60.0)
def criterion_10(seeds: int = 100, n: int = 500, delta: float = 0.05):
    good, covered, violations = 0, 0, 0
    for s in range(seeds):
        sc = random_scenario(seed=2000 + s)
        mdp = sc.mdp
        ref = sc.behavior_policy
        tuples = sample_tuples(mdp, sc.data_dist(), n, s)
        pols = enumerate_deterministic(mdp.n_states, mdp.n_actions)
        res = opt.model_pessimism(sc.classes["models"], pols, tuples, delta, mdp.init_dist, mdp.reward,
                                  "relative", ref)
        ok = policy_return(mdp, res.policy) >= policy_return(mdp, ref) - 1e-9
        in_vs = bool(res.trace["version_space"].member_flags[0])
        covered += in_vs
        violations += in_vs and not ok
        good += ok
    mdp, models, pols, ref, d_D = contrast_instance()
    tuples = sample_tuples(mdp, d_D, 200, 10)
    abs_res = opt.model_pessimism(models, pols, tuples, delta, mdp.init_dist, mdp.reward, "absolute")
    rel_res = opt.model_pessimism(models, pols, tuples, delta, mdp.init_dist, mdp.reward, "relative", ref)
    worst_ret, worst_imp = contrast_objectives(mdp, models, pols, ref)
    both_in = bool(abs_res.trace["version_space"].member_flags.all())
    differ = (abs_res.trace["index"] == int(np.argmax(worst_ret)) and rel_res.trace["index"] == int(np.argmax(worst_imp))
              and abs_res.trace["index"] != rel_res.trace["index"] and both_in)
    ok = violations == 0 and good >= 0.95 * seeds and differ
    return ok, {"improved": good, "truth_in_vs": covered, "violations": violations,
                "absolute_pick": abs_res.trace["index"], "relative_pick": rel_res.trace["index"]}, (
        f"J >= J_ref in {good}/{seeds} ({covered} with truth in set, {violations} violations); "
        f"contrast picks absolute={abs_res.trace['index']} relative={rel_res.trace['index']}")


# ---------------------------------------------------------------------------
# 11: determinism


def shipped_grid_configs() -> list:
    out = []
    for p in sorted(CONFIG_DIR.glob("*.json")):
        d = json.loads(p.read_text())
        if "check" not in d:
            out.append((p.name, ExperimentConfig.from_dict(d)))
    return out


def _canon(rows):
    return sorted(json.dumps(r, sort_keys=True) for r in rows)


@_timed(11, "end-to-end determinism", 60.0)
def criterion_11(max_seeds: int = 3, max_n: int = 2):
    """Every shipped grid config, trimmed to a few seeds and sample sizes, under 1 and 8 workers."""
    same, names = True, []
    for name, cfg in shipped_grid_configs():
        cfg.seeds = min(cfg.seeds, max_seeds)
        cfg.n_grid = cfg.n_grid[:max_n]
        a = run_experiment(cfg, workers=1)
        b = run_experiment(cfg, workers=8)
        same &= _canon(a) == _canon(b)
        names.append(name)
    ok = same and bool(names)
    return ok, {"configs": names}, f"{len(names)} configs identical under 1 and 8 workers: {same}"


CHECKS = {i: globals()[f"criterion_{i}"] for i in range(1, 12)}


def run_check(criterion: int, **params) -> CheckResult:
    return CHECKS[int(criterion)](**params)
