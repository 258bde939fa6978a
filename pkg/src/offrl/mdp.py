"""Finite MDPs, policies, and exact dynamic-programming oracles.

Value functions, weight functions and occupancy tensors are plain numpy
arrays of shape ``(n_states, n_actions)``. Policies are small frozen
dataclasses so that stationary, time-indexed and mixture policies can be
told apart by the oracles.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from typing import Optional, Sequence, Union

import numpy as np

ROW_TOL = 1e-12


@dataclass(frozen=True)
class RewardNoise:
    """Discrete reward distribution per (s, a): ``values[s, a, k]`` w.p. ``probs[s, a, k]``."""

    values: np.ndarray
    probs: np.ndarray

    def mean(self) -> np.ndarray:
        return (self.values * self.probs).sum(axis=-1)

    def second_moment(self) -> np.ndarray:
        return (self.values**2 * self.probs).sum(axis=-1)


@dataclass(frozen=True)
class TabularMDP:
    transition: np.ndarray  # (S, A, S)
    reward: np.ndarray  # (S, A) mean reward
    gamma: float
    init_dist: np.ndarray  # (S,)
    r_max: float = 1.0
    reward_noise: Optional[RewardNoise] = None
    absorbing: Optional[int] = None  # trajectories stop on entering this state

    def __post_init__(self):
        P = np.asarray(self.transition, dtype=float)
        R = np.asarray(self.reward, dtype=float)
        d0 = np.asarray(self.init_dist, dtype=float)
        object.__setattr__(self, "transition", P)
        object.__setattr__(self, "reward", R)
        object.__setattr__(self, "init_dist", d0)
        S, A = R.shape
        if P.shape != (S, A, S) or d0.shape != (S,):
            raise ValueError(f"inconsistent shapes: P{P.shape} R{R.shape} d0{d0.shape}")
        if (P < 0).any() or np.abs(P.sum(-1) - 1).max() > ROW_TOL:
            raise ValueError("transition rows must be distributions")
        if (d0 < 0).any() or abs(d0.sum() - 1) > ROW_TOL:
            raise ValueError("init_dist must be a distribution")
        if not 0 <= self.gamma < 1:
            raise ValueError("gamma must lie in [0, 1)")
        if (R < 0).any() or (R > self.r_max).any():
            raise ValueError("mean rewards must lie in [0, r_max]")
        if self.reward_noise is not None:
            rn = self.reward_noise
            if rn.values.shape[:2] != (S, A) or rn.values.shape != rn.probs.shape:
                raise ValueError("reward_noise shape mismatch")
            if np.abs(rn.probs.sum(-1) - 1).max() > ROW_TOL:
                raise ValueError("reward_noise probabilities must sum to 1")
            if (rn.values < 0).any() or (rn.values > self.r_max).any():
                raise ValueError("reward_noise support must lie in [0, r_max]")
            if np.abs(rn.mean() - R).max() > 1e-12:
                raise ValueError("reward_noise mean must equal reward")

    @property
    def n_states(self) -> int:
        return self.reward.shape[0]

    @property
    def n_actions(self) -> int:
        return self.reward.shape[1]

    @property
    def v_max(self) -> float:
        return self.r_max / (1.0 - self.gamma)

    def replace(self, **changes) -> "TabularMDP":
        fields = dict(
            transition=self.transition,
            reward=self.reward,
            gamma=self.gamma,
            init_dist=self.init_dist,
            r_max=self.r_max,
            reward_noise=self.reward_noise,
            absorbing=self.absorbing,
        )
        fields.update(changes)
        return TabularMDP(**fields)

    # -- serialization ---------------------------------------------------
    def to_dict(self) -> dict:
        out = {
            "n_states": self.n_states,
            "n_actions": self.n_actions,
            "transition": self.transition.tolist(),
            "reward": self.reward.tolist(),
            "gamma": float(self.gamma),
            "init_dist": self.init_dist.tolist(),
            "r_max": float(self.r_max),
        }
        if self.reward_noise is not None:
            out["reward_noise"] = {
                "values": self.reward_noise.values.tolist(),
                "probs": self.reward_noise.probs.tolist(),
            }
        if self.absorbing is not None:
            out["absorbing"] = int(self.absorbing)
        return out

    @classmethod
    def from_dict(cls, d: dict) -> "TabularMDP":
        noise = None
        if d.get("reward_noise") is not None:
            noise = RewardNoise(
                np.array(d["reward_noise"]["values"], dtype=float),
                np.array(d["reward_noise"]["probs"], dtype=float),
            )
        mdp = cls(
            transition=np.array(d["transition"], dtype=float),
            reward=np.array(d["reward"], dtype=float),
            gamma=float(d["gamma"]),
            init_dist=np.array(d["init_dist"], dtype=float),
            r_max=float(d["r_max"]),
            reward_noise=noise,
            absorbing=d.get("absorbing"),
        )
        if (mdp.n_states, mdp.n_actions) != (d["n_states"], d["n_actions"]):
            raise ValueError("declared sizes disagree with tensors")
        return mdp

    def to_json(self) -> str:
        return json.dumps(self.to_dict())

    @classmethod
    def from_json(cls, text: str) -> "TabularMDP":
        return cls.from_dict(json.loads(text))

    def save(self, path) -> None:
        with open(path, "w") as fh:
            fh.write(self.to_json())

    @classmethod
    def load(cls, path) -> "TabularMDP":
        with open(path) as fh:
            return cls.from_json(fh.read())


# ---------------------------------------------------------------------------
# policies


@dataclass(frozen=True)
class StationaryPolicy:
    probs: np.ndarray  # (S, A)

    def __post_init__(self):
        p = np.asarray(self.probs, dtype=float)
        object.__setattr__(self, "probs", p)
        if p.ndim != 2 or (p < 0).any() or np.abs(p.sum(1) - 1).max() > ROW_TOL:
            raise ValueError("policy rows must be distributions")

    @classmethod
    def uniform(cls, n_states: int, n_actions: int) -> "StationaryPolicy":
        return cls(np.full((n_states, n_actions), 1.0 / n_actions))

    @classmethod
    def deterministic(cls, actions: Sequence[int], n_actions: int) -> "StationaryPolicy":
        actions = np.asarray(actions, dtype=int)
        probs = np.zeros((len(actions), n_actions))
        probs[np.arange(len(actions)), actions] = 1.0
        return cls(probs)

    @classmethod
    def constant(cls, action: int, n_states: int, n_actions: int) -> "StationaryPolicy":
        return cls.deterministic([action] * n_states, n_actions)


@dataclass(frozen=True)
class NonstationaryPolicy:
    """``steps[k-1]`` is pi_k; a K-step rollout takes its t-th action from pi_{K-t}."""

    steps: tuple

    def __post_init__(self):
        object.__setattr__(self, "steps", tuple(self.steps))
        if not self.steps:
            raise ValueError("nonstationary policy needs at least one step")

    @property
    def horizon(self) -> int:
        return len(self.steps)

    def at_time(self, t: int) -> StationaryPolicy:
        return self.steps[self.horizon - 1 - t]


@dataclass(frozen=True)
class MixturePolicy:
    """Trajectory-level mixture: one component is drawn at the start of each episode."""

    components: tuple
    weights: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "components", tuple(self.components))
        w = np.asarray(self.weights, dtype=float)
        object.__setattr__(self, "weights", w)
        if len(w) != len(self.components) or (w < 0).any() or abs(w.sum() - 1) > ROW_TOL:
            raise ValueError("mixture weights must be a distribution over components")

    @classmethod
    def uniform(cls, components) -> "MixturePolicy":
        components = tuple(components)
        return cls(components, np.full(len(components), 1.0 / len(components)))


Policy = Union[StationaryPolicy, NonstationaryPolicy, MixturePolicy]


@dataclass(frozen=True)
class OccupancyMeasure:
    dist: np.ndarray  # (S, A)
    per_step: Optional[list] = field(default=None)

    def __post_init__(self):
        d = np.asarray(self.dist, dtype=float)
        object.__setattr__(self, "dist", d)
        if (d < -1e-15).any() or abs(d.sum() - 1) > 1e-10:
            raise ValueError("occupancy must be a distribution")

    def state_marginal(self) -> np.ndarray:
        return self.dist.sum(axis=1)


def as_dist(d) -> np.ndarray:
    return d.dist if isinstance(d, OccupancyMeasure) else np.asarray(d, dtype=float)


# ---------------------------------------------------------------------------
# oracles


def _check_f(mdp: TabularMDP, f: np.ndarray) -> np.ndarray:
    f = np.asarray(f, dtype=float)
    if f.shape != (mdp.n_states, mdp.n_actions):
        raise ValueError(f"value function shape {f.shape} != {(mdp.n_states, mdp.n_actions)}")
    return f


def state_values(f: np.ndarray, policy: StationaryPolicy) -> np.ndarray:
    """f(s, pi) = sum_a pi(a|s) f(s, a)."""
    return (np.asarray(f) * policy.probs).sum(axis=1)


def bellman_backup(mdp: TabularMDP, f: np.ndarray, policy: Optional[StationaryPolicy] = None) -> np.ndarray:
    """Policy backup ``R + gamma P f(., pi)``; ``policy=None`` gives the optimality backup."""
    f = _check_f(mdp, f)
    nxt = f.max(axis=1) if policy is None else state_values(f, policy)
    return mdp.reward + mdp.gamma * mdp.transition @ nxt


def policy_transition(mdp: TabularMDP, policy: StationaryPolicy) -> np.ndarray:
    """(SA x SA) matrix of P(s'|s,a) pi(a'|s')."""
    S, A = mdp.n_states, mdp.n_actions
    M = mdp.transition[:, :, :, None] * policy.probs[None, None, :, :]
    return M.reshape(S * A, S * A)


def solve_q(mdp: TabularMDP, policy: Optional[StationaryPolicy] = None, tol: float = 1e-10) -> np.ndarray:
    if tol <= 0:
        raise ValueError("tol must be positive")
    S, A = mdp.n_states, mdp.n_actions
    if policy is not None:
        M = np.eye(S * A) - mdp.gamma * policy_transition(mdp, policy)
        return np.linalg.solve(M, mdp.reward.reshape(-1)).reshape(S, A)
    f = np.zeros((S, A))
    if mdp.gamma == 0:
        return mdp.reward.copy()
    stop = tol * (1 - mdp.gamma) / mdp.gamma
    while True:
        g = bellman_backup(mdp, f)
        if np.abs(g - f).max() <= stop:
            return g
        f = g


def greedy(f: np.ndarray) -> StationaryPolicy:
    """Deterministic greedy policy; ties go to the lowest action index."""
    f = np.asarray(f)
    return StationaryPolicy.deterministic(np.argmax(f, axis=1), f.shape[1])


def occupancy(mdp: TabularMDP, policy, horizon: Optional[int] = None) -> OccupancyMeasure:
    """Discounted occupancy with optional per-step distributions d_t for t < horizon.

    For a nonstationary policy the rollout is truncated at its own horizon K and
    ``dist`` is the discounted per-step average normalized over those K steps.
    """
    S, A = mdp.n_states, mdp.n_actions
    if isinstance(policy, MixturePolicy):
        parts = [occupancy(mdp, c, horizon) for c in policy.components]
        dist = sum(w * p.dist for w, p in zip(policy.weights, parts))
        per_step = None
        if horizon is not None:
            per_step = [sum(w * p.per_step[t] for w, p in zip(policy.weights, parts)) for t in range(horizon)]
        return OccupancyMeasure(dist, per_step)

    if isinstance(policy, NonstationaryPolicy):
        K = policy.horizon
        steps = per_step_occupancy(mdp, policy, K)
        disc = mdp.gamma ** np.arange(K)
        dist = sum(g * d for g, d in zip(disc, steps)) / disc.sum()
        return OccupancyMeasure(dist, steps)

    nu0 = (mdp.init_dist[:, None] * policy.probs).reshape(-1)
    M = np.eye(S * A) - mdp.gamma * policy_transition(mdp, policy).T
    dist = (1 - mdp.gamma) * np.linalg.solve(M, nu0)
    dist = np.clip(dist, 0.0, None).reshape(S, A)
    dist /= dist.sum()
    per_step = per_step_occupancy(mdp, policy, horizon) if horizon else None
    return OccupancyMeasure(dist, per_step)


def per_step_occupancy(mdp: TabularMDP, policy, horizon: int) -> list:
    """d_t(s, a) for t = 0..horizon-1."""
    out = []
    state = mdp.init_dist.copy()
    for t in range(horizon):
        pi = policy.at_time(t) if isinstance(policy, NonstationaryPolicy) else policy
        d = state[:, None] * pi.probs
        out.append(d)
        state = np.einsum("sa,sap->p", d, mdp.transition)
    return out


def finite_horizon_values(mdp: TabularMDP, policy, K: int) -> list:
    """[Q_1, ..., Q_K] with Q_1 = R and Q_k = R + gamma P Q_{k-1}(., pi_{k-1}).

    ``policy`` may be stationary or a NonstationaryPolicy with at least K-1 steps.
    """
    if K < 1:
        raise ValueError("K must be >= 1")
    qs = [mdp.reward.copy()]
    for k in range(2, K + 1):
        pi = policy.steps[k - 2] if isinstance(policy, NonstationaryPolicy) else policy
        qs.append(bellman_backup(mdp, qs[-1], pi))
    return qs


def policy_return(mdp: TabularMDP, policy, f: Optional[np.ndarray] = None) -> float:
    """Exact J(pi); with ``f`` the plug-in J_f(pi) = E_{d0}[f(s, pi)].

    A NonstationaryPolicy is evaluated as its K-step truncated return.
    """
    if isinstance(policy, MixturePolicy):
        return float(sum(w * policy_return(mdp, c, f) for w, c in zip(policy.weights, policy.components)))
    if isinstance(policy, NonstationaryPolicy):
        K = policy.horizon
        q = finite_horizon_values(mdp, policy, K)[-1] if f is None else f
        return float(mdp.init_dist @ state_values(q, policy.steps[K - 1]))
    q = solve_q(mdp, policy) if f is None else _check_f(mdp, f)
    return float(mdp.init_dist @ state_values(q, policy))


def truncated_return(mdp: TabularMDP, policy, K: int) -> float:
    """E[sum_{t<K} gamma^t r_t] for a stationary or K-step nonstationary policy."""
    steps = per_step_occupancy(mdp, policy, K)
    return float(sum(mdp.gamma**t * (d * mdp.reward).sum() for t, d in enumerate(steps)))


def stationary_distribution(mdp: TabularMDP, policy: StationaryPolicy) -> np.ndarray:
    """An invariant distribution of the (s, a) chain under ``policy`` (leading left eigenvector)."""
    M = policy_transition(mdp, policy)
    vals, vecs = np.linalg.eig(M.T)
    v = np.real(vecs[:, np.argmin(np.abs(vals - 1))])
    v = np.abs(v) / np.abs(v).sum()
    return v.reshape(mdp.n_states, mdp.n_actions)


def enumerate_deterministic(n_states: int, n_actions: int) -> list:
    """All |A|^|S| deterministic stationary policies in lexicographic order."""
    grids = np.stack(np.meshgrid(*[np.arange(n_actions)] * n_states, indexing="ij"), -1)
    return [StationaryPolicy.deterministic(row, n_actions) for row in grids.reshape(-1, n_states)]


def random_mdp(
    n_states: int,
    n_actions: int,
    gamma: float = 0.9,
    rng: Optional[np.random.Generator] = None,
    r_max: float = 1.0,
    concentration: float = 1.0,
) -> TabularMDP:
    """Dirichlet transitions, uniform rewards in [0, r_max], Dirichlet initial distribution."""
    rng = np.random.default_rng(rng)
    P = rng.dirichlet(np.full(n_states, concentration), size=(n_states, n_actions))
    R = rng.uniform(0, r_max, size=(n_states, n_actions))
    d0 = rng.dirichlet(np.ones(n_states))
    return TabularMDP(P, R, gamma, d0, r_max)


def random_policy(n_states: int, n_actions: int, rng=None) -> StationaryPolicy:
    rng = np.random.default_rng(rng)
    return StationaryPolicy(rng.dirichlet(np.ones(n_actions), size=n_states))
