"""Named scenarios: small MDPs with known truths, behavior data, targets and classes."""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field
from typing import Optional, Union

import numpy as np

from .classes import FeatureMap, FiniteClass, LinearClass, gen_low_rank_mdp
from .coverage import c_inf_per_step, simplex_grid
from .mdp import (
    OccupancyMeasure,
    RewardNoise,
    StationaryPolicy,
    TabularMDP,
    greedy,
    occupancy,
    per_step_occupancy,
    random_mdp,
    random_policy,
    solve_q,
)


@dataclass
class Scenario:
    name: str
    mdp: TabularMDP
    behavior: Union[StationaryPolicy, OccupancyMeasure]
    targets: dict
    classes: dict = field(default_factory=dict)
    notes: str = ""
    params: dict = field(default_factory=dict)

    def __post_init__(self):
        S, A = self.mdp.n_states, self.mdp.n_actions
        shapes = [p.probs.shape for p in self.targets.values() if isinstance(p, StationaryPolicy)]
        beh = self.behavior.probs if isinstance(self.behavior, StationaryPolicy) else self.behavior.dist
        if beh.shape != (S, A) or any(s != (S, A) for s in shapes):
            raise ValueError(f"scenario {self.name}: inconsistent dimensions")

    def data_dist(self) -> OccupancyMeasure:
        if isinstance(self.behavior, OccupancyMeasure):
            return self.behavior
        return occupancy(self.mdp, self.behavior)

    @property
    def behavior_policy(self) -> Optional[StationaryPolicy]:
        return self.behavior if isinstance(self.behavior, StationaryPolicy) else None

    @property
    def horizon(self) -> Optional[int]:
        return self.params.get("H")


def loop(H: Optional[int] = None, gamma: float = 0.9) -> Scenario:
    """One state, two actions with rewards (1, 0). With a horizon the state is copied per step
    and a zero-reward absorbing state follows the last copy."""
    if H is None:
        mdp = TabularMDP(np.ones((1, 2, 1)), np.array([[1.0, 0.0]]), gamma, np.ones(1))
    else:
        S = H + 1
        P = np.zeros((S, 2, S))
        for t in range(H):
            P[t, :, t + 1] = 1.0
        P[H, :, H] = 1.0
        R = np.zeros((S, 2))
        R[:H, 0] = 1.0
        d0 = np.zeros(S)
        d0[0] = 1.0
        mdp = TabularMDP(P, R, gamma, d0, absorbing=H)
    S = mdp.n_states
    targets = {
        "always_a1": StationaryPolicy.constant(0, S, 2),
        "always_a2": StationaryPolicy.constant(1, S, 2),
        "uniform": StationaryPolicy.uniform(S, 2),
    }
    return Scenario("loop", mdp, StationaryPolicy.uniform(S, 2), targets, {"tabular": LinearClass(FeatureMap.tabular(S, 2))},
                    "single-state loop; horizon realized by per-step copies", {"H": H, "gamma": gamma})


def tree(branching: int = 2, H: int = 3, gamma: float = 0.9) -> Scenario:
    """Deterministic complete tree of depth H; every root-to-leaf path is one policy."""
    A = branching
    level_start = [sum(A**i for i in range(t)) for t in range(H + 1)]
    n_internal = level_start[H]
    S = n_internal + 1  # absorbing sink after the last level
    sink = n_internal
    P = np.zeros((S, A, S))
    for t in range(H):
        for j in range(A**t):
            s = level_start[t] + j
            for a in range(A):
                P[s, a, level_start[t + 1] + j * A + a if t + 1 < H else sink] = 1.0
    P[sink, :, sink] = 1.0
    R = np.zeros((S, A))
    R[level_start[H - 1], 0] = 1.0  # one rewarding leaf edge
    d0 = np.zeros(S)
    d0[0] = 1.0
    mdp = TabularMDP(P, R, gamma, d0, absorbing=sink)
    targets = {}
    for path in itertools.product(range(A), repeat=H):
        acts = np.zeros(S, dtype=int)
        node = 0
        for t, a in enumerate(path):
            acts[level_start[t] + node] = a
            node = node * A + a
        targets["path_" + "".join(map(str, path))] = StationaryPolicy.deterministic(acts, A)
    return Scenario("tree", mdp, StationaryPolicy.uniform(S, A), targets, {}, "complete tree; paths are policies",
                    {"H": H, "branching": A, "gamma": gamma, "level_start": level_start})


def tree_minimax_coverage(sc: Scenario, resolution: Optional[int] = None) -> float:
    """min over a simplex grid of per-step data distributions of the worst per-step ratio over path policies.

    The per-step ratio at step t only involves the step-t data distribution,
    so the minimum over the product grid is the maximum over steps of the
    per-step minima; each per-step minimum is found exhaustively.
    """
    H, A = sc.params["H"], sc.params["branching"]
    starts = sc.params["level_start"]
    steps = [per_step_occupancy(sc.mdp, p, H) for p in sc.targets.values()]
    worst = 0.0
    for t in range(H):
        nodes = np.arange(starts[t], starts[t] + A**t)
        k = len(nodes) * A
        grid = simplex_grid(k, resolution or k)
        level = np.stack([d[t][nodes].reshape(-1) for d in steps])  # (policies, k)
        best = np.inf
        for q in grid:
            best = min(best, max(c_inf_per_step([p], [q]) for p in level))
        worst = max(worst, best)
    return worst


def divergence(gamma: float = 0.95) -> Scenario:
    """Two states, one action, s0 -> s1 -> s1, zero rewards, feature values (1, 2), uniform data."""
    P = np.zeros((2, 1, 2))
    P[0, 0, 1] = P[1, 0, 1] = 1.0
    mdp = TabularMDP(P, np.zeros((2, 1)), gamma, np.array([0.5, 0.5]))
    phi = FeatureMap(np.array([[[1.0]], [[2.0]]]))
    beh = OccupancyMeasure(np.array([[0.5], [0.5]]))
    pi = StationaryPolicy(np.ones((2, 1)))
    return Scenario("divergence", mdp, beh, {"pi": pi}, {"linear": LinearClass(phi), "features": phi},
                    "projected evaluation multiplies the coefficient by 6 gamma / 5 per step", {"gamma": gamma})


def bandit(means=(0.7, 0.8, 0.5), behavior=(0.9, 0.05, 0.05), cp: int = 0, grid_step: float = 0.1,
           grid_min: float = 0.0) -> Scenario:
    """One-state bandit (gamma = 0) with Bernoulli rewards.

    The finite class is the product grid of per-arm values in [grid_min, 1],
    which contains the true reward vector whenever the means lie on the grid.
    """
    means = np.asarray(means, float)
    A = len(means)
    noise = RewardNoise(np.tile([0.0, 1.0], (1, A, 1)), np.stack([1 - means, means], -1)[None])
    mdp = TabularMDP(np.ones((1, A, 1)), means[None], 0.0, np.ones(1), 1.0, noise)
    grid = np.round(np.arange(grid_min, 1.0 + 1e-9, grid_step), 12)
    F = FiniteClass(np.array(list(itertools.product(grid, repeat=A)))[:, None, :])
    arms = {f"arm_{a}": StationaryPolicy.constant(a, 1, A) for a in range(A)}
    targets = dict(arms, cp=arms[f"arm_{cp}"])
    classes = {"finite": F, "tabular": LinearClass(FeatureMap.tabular(1, A))}
    return Scenario("bandit", mdp, StationaryPolicy(np.array([behavior], float)), targets, classes,
                    "partial-coverage multi-armed bandit", {"means": means.tolist(), "cp": cp, "gamma": 0.0})


def lowrank(d: int = 2, n_states: int = 6, n_actions: int = 2, gamma: float = 0.9, seed: int = 0) -> Scenario:
    mdp, phi, psi, theta_r = gen_low_rank_mdp(d, n_states, n_actions, seed, gamma)
    opt = greedy(solve_q(mdp))
    targets = {"optimal": opt, "uniform": StationaryPolicy.uniform(n_states, n_actions)}
    classes = {"linear": LinearClass(phi), "features": phi, "psi": psi, "theta_r": theta_r,
               "tabular": LinearClass(FeatureMap.tabular(n_states, n_actions))}
    return Scenario("lowrank", mdp, StationaryPolicy.uniform(n_states, n_actions), targets, classes,
                    "rank-d transition factorization", {"d": d, "gamma": gamma, "seed": seed})


def random_scenario(n_states: int = 4, n_actions: int = 2, gamma: float = 0.9, seed: int = 0,
                    n_corrupt: int = 4, corruption: float = 0.3) -> Scenario:
    """Random MDP, uniform behavior, a random target.

    Selection candidates and the finite class contain Q^pi; candidate models contain the true kernel.
    """
    rng = np.random.default_rng(seed)
    mdp = random_mdp(n_states, n_actions, gamma, rng)
    pi = random_policy(n_states, n_actions, rng)
    q = solve_q(mdp, pi)
    v = mdp.v_max
    cands = [q]
    for _ in range(n_corrupt):
        mag = rng.uniform(corruption, corruption + 0.2, size=q.shape) * v
        cands.append(np.clip(q + rng.choice([-1.0, 1.0], size=q.shape) * mag, 0, v))
    models = [mdp.transition]
    for w in (0.3, 0.6):
        noise = rng.dirichlet(np.ones(n_states), size=(n_states, n_actions))
        models.append((1 - w) * mdp.transition + w * noise)
    classes = {
        "tabular": LinearClass(FeatureMap.tabular(n_states, n_actions)),
        "models": models,
        "candidates": cands,
        "finite": FiniteClass(np.stack([q, q + v / 2, q - v / 2, q + v / 4])),
    }
    return Scenario("random", mdp, StationaryPolicy.uniform(n_states, n_actions), {"pi": pi}, classes,
                    "random Dirichlet MDP", {"n_states": n_states, "n_actions": n_actions, "gamma": gamma, "seed": seed})


BUILDERS = {
    "loop": loop,
    "tree": tree,
    "divergence": divergence,
    "bandit": bandit,
    "lowrank": lowrank,
    "random": random_scenario,
}


def build_scenario(name: str, params: Optional[dict] = None) -> Scenario:
    if name not in BUILDERS:
        raise KeyError(f"unknown scenario {name!r}; choose from {sorted(BUILDERS)}")
    try:
        return BUILDERS[name](**(params or {}))
    except TypeError as exc:
        raise ValueError(f"invalid params for {name}: {exc}") from None
