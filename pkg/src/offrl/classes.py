"""Value-function classes and the structures built on them.

Three kinds of class share one small interface (``values``, ``fit``,
``project``): an explicit finite list, a linear span of features, and
piecewise-constant functions over a partition of state-action pairs.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional, Union

import numpy as np

from .data import TupleDataset
from .mdp import OccupancyMeasure, StationaryPolicy, TabularMDP, as_dist, bellman_backup, solve_q


class SingularGramError(np.linalg.LinAlgError):
    pass


@dataclass(frozen=True)
class FeatureMap:
    features: np.ndarray  # (S, A, d)
    norm_bound: Optional[float] = None

    def __post_init__(self):
        phi = np.asarray(self.features, dtype=float)
        object.__setattr__(self, "features", phi)
        norms = np.linalg.norm(phi, axis=-1)
        if self.norm_bound is None:
            object.__setattr__(self, "norm_bound", float(norms.max()))
        elif norms.max() > self.norm_bound * (1 + 1e-12):
            raise ValueError("feature norms exceed norm_bound")

    @classmethod
    def tabular(cls, n_states: int, n_actions: int) -> "FeatureMap":
        return cls(np.eye(n_states * n_actions).reshape(n_states, n_actions, -1))

    @property
    def dim(self) -> int:
        return self.features.shape[-1]

    @property
    def flat(self) -> np.ndarray:
        return self.features.reshape(-1, self.dim)

    def scaled(self, c: float) -> "FeatureMap":
        return FeatureMap(self.features * c)

    def next_policy_features(self, policy: StationaryPolicy) -> np.ndarray:
        """phi(s, pi) = sum_a pi(a|s) phi(s, a), shape (S, d)."""
        return np.einsum("sa,sad->sd", policy.probs, self.features)

    def mean(self, d) -> np.ndarray:
        return np.einsum("sa,sad->d", as_dist(d), self.features)

    def gram(self, d) -> np.ndarray:
        g = np.einsum("sa,sad,sae->de", as_dist(d), self.features, self.features)
        return 0.5 * (g + g.T)


@dataclass(frozen=True)
class Partition:
    cell_of: np.ndarray  # (S, A) ints, contiguous from 0
    n_cells: int

    def __post_init__(self):
        c = np.asarray(self.cell_of, dtype=np.int64)
        object.__setattr__(self, "cell_of", c)
        if c.min() < 0 or set(np.unique(c)) != set(range(self.n_cells)):
            raise ValueError("cell indices must be contiguous from 0 and all used")

    @classmethod
    def from_labels(cls, labels: np.ndarray) -> "Partition":
        labels = np.asarray(labels)
        _, inv = np.unique(labels.reshape(-1), return_inverse=True)
        inv = inv.reshape(labels.shape)
        return cls(inv, int(inv.max()) + 1)

    @classmethod
    def identity(cls, n_states: int, n_actions: int) -> "Partition":
        return cls(np.arange(n_states * n_actions).reshape(n_states, n_actions), n_states * n_actions)

    def indicator_features(self) -> FeatureMap:
        return FeatureMap(np.eye(self.n_cells)[self.cell_of])

    def cell_means(self, values: np.ndarray, weights: np.ndarray) -> np.ndarray:
        """Weighted mean per cell; cells of zero mass fall back to the plain mean."""
        c = self.cell_of.reshape(-1)
        v = np.asarray(values, dtype=float).reshape(-1)
        w = np.asarray(weights, dtype=float).reshape(-1)
        mass = np.bincount(c, weights=w, minlength=self.n_cells)
        num = np.bincount(c, weights=w * v, minlength=self.n_cells)
        size = np.bincount(c, minlength=self.n_cells)
        plain = np.bincount(c, weights=v, minlength=self.n_cells) / size
        with np.errstate(invalid="ignore", divide="ignore"):
            return np.where(mass > 0, num / np.where(mass > 0, mass, 1), plain)

    def to_dict(self) -> dict:
        return {"kind": "partition", "cell_of": self.cell_of.tolist(), "n_cells": self.n_cells}


# ---------------------------------------------------------------------------
# function classes


def _weighted_lstsq(X: np.ndarray, y: np.ndarray, w: np.ndarray, ridge: float) -> np.ndarray:
    G = (X * w[:, None]).T @ X
    b = (X * w[:, None]).T @ y
    if ridge > 0:
        return np.linalg.solve(G + ridge * np.eye(G.shape[0]), b)
    eig = np.linalg.eigvalsh(0.5 * (G + G.T))
    if eig[0] <= 1e-12 * max(eig[-1], 1e-300):
        raise SingularGramError("gram matrix is singular; pass ridge > 0")
    return np.linalg.solve(G, b)


@dataclass(frozen=True)
class FiniteClass:
    members: np.ndarray  # (m, S, A)

    def __post_init__(self):
        m = np.asarray(self.members, dtype=float)
        if m.ndim == 2:
            m = m[None]
        object.__setattr__(self, "members", m)
        if len(m) == 0:
            raise ValueError("finite class must be non-empty")

    def __len__(self) -> int:
        return len(self.members)

    def __getitem__(self, i) -> np.ndarray:
        return self.members[i]

    def fit(self, tuples: TupleDataset, targets: np.ndarray, ridge: float = 0.0) -> np.ndarray:
        return self.members[self.fit_index(tuples, targets)]

    def fit_index(self, tuples: TupleDataset, targets: np.ndarray) -> int:
        pred = self.members[:, tuples.states, tuples.actions]
        return int(np.argmin(((pred - targets) ** 2).sum(axis=1)))

    def project(self, f: np.ndarray, weighting, ridge: float = 0.0) -> np.ndarray:
        w = as_dist(weighting)
        err = (((self.members - f) ** 2) * w).sum(axis=(1, 2))
        return self.members[int(np.argmin(err))]

    def to_dict(self) -> dict:
        return {"kind": "finite", "members": self.members.tolist()}


@dataclass(frozen=True)
class LinearClass:
    features: FeatureMap
    coef_bound: Optional[float] = None

    @property
    def dim(self) -> int:
        return self.features.dim

    def values(self, theta: np.ndarray) -> np.ndarray:
        return self.features.features @ theta

    def _clip(self, theta: np.ndarray) -> np.ndarray:
        if self.coef_bound is not None:
            norm = np.linalg.norm(theta)
            if norm > self.coef_bound:
                theta = theta * (self.coef_bound / norm)
        return theta

    def fit_coef(self, tuples: TupleDataset, targets: np.ndarray, ridge: float = 0.0) -> np.ndarray:
        X = self.features.features[tuples.states, tuples.actions]
        n = max(len(tuples), 1)
        theta = _weighted_lstsq(X, np.asarray(targets, float), np.full(len(X), 1.0 / n), ridge)
        return self._clip(theta)

    def fit(self, tuples: TupleDataset, targets: np.ndarray, ridge: float = 0.0) -> np.ndarray:
        return self.values(self.fit_coef(tuples, targets, ridge))

    def project_coef(self, f: np.ndarray, weighting, ridge: float = 0.0) -> np.ndarray:
        X = self.features.flat
        return self._clip(_weighted_lstsq(X, np.asarray(f).reshape(-1), as_dist(weighting).reshape(-1), ridge))

    def project(self, f: np.ndarray, weighting, ridge: float = 0.0) -> np.ndarray:
        return self.values(self.project_coef(f, weighting, ridge))

    def to_dict(self) -> dict:
        return {"kind": "linear", "features": self.features.features.tolist(), "coef_bound": self.coef_bound}


@dataclass(frozen=True)
class PiecewiseConstantClass:
    partition: Partition

    def values(self, cell_values: np.ndarray) -> np.ndarray:
        return np.asarray(cell_values)[self.partition.cell_of]

    def fit(self, tuples: TupleDataset, targets: np.ndarray, ridge: float = 0.0) -> np.ndarray:
        """Per-cell target mean; cells without data get 0."""
        cells = self.partition.cell_of[tuples.states, tuples.actions]
        k = self.partition.n_cells
        cnt = np.bincount(cells, minlength=k)
        tot = np.bincount(cells, weights=np.asarray(targets, float), minlength=k)
        means = np.divide(tot, cnt, out=np.zeros(k), where=cnt > 0)
        return self.values(means)

    def project(self, f: np.ndarray, weighting, ridge: float = 0.0) -> np.ndarray:
        """Within-cell weighted mean; zero-mass cells use the unweighted mean."""
        return self.values(self.partition.cell_means(f, as_dist(weighting)))

    def to_dict(self) -> dict:
        return self.partition.to_dict() | {"kind": "piecewise_constant"}


FunctionClass = Union[FiniteClass, LinearClass, PiecewiseConstantClass]


def class_from_dict(d: dict) -> FunctionClass:
    if d["kind"] == "finite":
        return FiniteClass(np.array(d["members"]))
    if d["kind"] == "linear":
        return LinearClass(FeatureMap(np.array(d["features"])), d.get("coef_bound"))
    if d["kind"] == "piecewise_constant":
        return PiecewiseConstantClass(Partition(np.array(d["cell_of"]), d["n_cells"]))
    raise ValueError(f"unknown class kind {d['kind']!r}")


def fit_least_squares(cls: FunctionClass, tuples: TupleDataset, targets, ridge: float = 0.0) -> np.ndarray:
    return cls.fit(tuples, np.asarray(targets, dtype=float), ridge)


def project(cls: FunctionClass, f: np.ndarray, weighting, ridge: float = 0.0) -> np.ndarray:
    return cls.project(np.asarray(f, dtype=float), weighting, ridge)


def span_features(cls) -> Optional[FeatureMap]:
    if isinstance(cls, LinearClass):
        return cls.features
    if isinstance(cls, PiecewiseConstantClass):
        return cls.partition.indicator_features()
    if isinstance(cls, FeatureMap):
        return cls
    return None


# ---------------------------------------------------------------------------
# Bellman completeness


@dataclass
class CompletenessReport:
    gap: float
    per_member: np.ndarray  # gap per finite member, or per span generator for linear F
    realization_gap: float  # distance from the class to the exact fixed point
    tol: float

    @property
    def complete(self) -> bool:
        return self.gap <= self.tol

    @property
    def realizable(self) -> bool:
        return self.realization_gap <= self.tol


def _span_residual(Phi: np.ndarray, y: np.ndarray) -> float:
    coef, *_ = np.linalg.lstsq(Phi, y, rcond=None)
    return float(np.abs(Phi @ coef - y).max())


def _distance_to(cls, target: np.ndarray) -> np.ndarray:
    feats = span_features(cls)
    if feats is not None:
        return np.array([_span_residual(feats.flat, target.reshape(-1))])
    return np.abs(cls.members - target).max(axis=(1, 2))


def check_completeness(
    classF, classG, mdp: TabularMDP, policy: Optional[StationaryPolicy] = None, tol: float = 1e-8
) -> CompletenessReport:
    """Worst-case sup-norm distance from G to the backup of members of F.

    A finite F is enumerated. A linear or piecewise-constant F is checked on
    the generators of its backup (the reward and the backed-up basis
    functions), which is exact for span membership. Against a linear G the
    distance is the sup-norm residual of the least-squares fit onto the span.
    """
    fixed = solve_q(mdp, policy)
    featsF = span_features(classF)
    if featsF is not None:
        if policy is None:
            raise ValueError("span check needs a policy backup; the optimality backup is nonlinear")
        nxt = featsF.next_policy_features(policy)
        gens = [mdp.reward] + [mdp.gamma * mdp.transition @ nxt[:, i] for i in range(featsF.dim)]
        per = np.array([_distance_to(classG, g).min() for g in gens])
    else:
        per = np.array([_distance_to(classG, bellman_backup(mdp, f, policy)).min() for f in classF.members])
    return CompletenessReport(float(per.max()), per, float(_distance_to(classF, fixed).min()), tol)


# ---------------------------------------------------------------------------
# low-rank MDPs


def gen_low_rank_mdp(d: int, n_states: int, n_actions: int, seed, gamma: float = 0.9):
    """Random rank-``d`` MDP with P(s'|s,a) = <phi(s,a), psi(s')> and R = <phi, theta_R>.

    ``phi`` rows lie on the simplex and each column of ``psi`` is a
    distribution over next states, so every transition row is a distribution.
    Returns ``(mdp, FeatureMap(phi), psi, theta_R)`` with ``psi`` of shape (S, d).
    """
    if d > n_states * n_actions:
        raise ValueError("d must not exceed n_states * n_actions")
    rng = np.random.default_rng(seed)
    phi = rng.dirichlet(np.ones(d), size=(n_states, n_actions))
    psi = rng.dirichlet(np.ones(n_states), size=d).T
    theta_r = rng.uniform(0, 1, size=d)
    P = phi @ psi.T
    P /= P.sum(-1, keepdims=True)
    R = np.clip(phi @ theta_r, 0.0, 1.0)
    d0 = rng.dirichlet(np.ones(n_states))
    return TabularMDP(P, R, gamma, d0, 1.0), FeatureMap(phi), psi, theta_r


# ---------------------------------------------------------------------------
# BVFT partitions and aggregated MDPs


def grid_index(f: np.ndarray, eps: float, v_max: float) -> np.ndarray:
    f = np.asarray(f, dtype=float)
    slack = 1e-9 * max(v_max, 1.0)
    if f.min() < -slack or f.max() > v_max + slack:
        raise ValueError("values outside [0, v_max]")
    top = math.ceil(v_max / eps)
    return np.clip(np.floor(np.clip(f, 0.0, v_max) / eps).astype(np.int64), 0, top)


def discretize(f: np.ndarray, eps: float, v_max: float) -> np.ndarray:
    """Grid value (index * eps) of each entry."""
    return grid_index(f, eps, v_max) * eps


def bvft_partition(f1: np.ndarray, f2: np.ndarray, eps: float, v_max: float) -> Partition:
    if eps <= 0:
        raise ValueError("eps must be positive")
    i1, i2 = grid_index(f1, eps, v_max), grid_index(f2, eps, v_max)
    width = math.ceil(v_max / eps) + 1
    return Partition.from_labels(i1 * width + i2)


@dataclass(frozen=True)
class AggregatedMDP:
    base: TabularMDP
    partition: Partition
    weights: np.ndarray  # (S, A) within-cell distribution
    transition_agg: np.ndarray  # (S, A, S)
    reward_agg: np.ndarray  # (S, A)

    @property
    def mdp(self) -> TabularMDP:
        b = self.base
        return TabularMDP(self.transition_agg, self.reward_agg, b.gamma, b.init_dist, b.r_max)


def aggregate_mdp(mdp: TabularMDP, partition: Partition, d_D) -> AggregatedMDP:
    S, A = mdp.n_states, mdp.n_actions
    c = partition.cell_of.reshape(-1)
    d = as_dist(d_D).reshape(-1)
    mass = np.bincount(c, weights=d, minlength=partition.n_cells)
    size = np.bincount(c, minlength=partition.n_cells)
    w = np.where(mass[c] > 0, d / np.where(mass[c] > 0, mass[c], 1), 1.0 / size[c])
    W = np.zeros((partition.n_cells, S * A))
    W[c, np.arange(S * A)] = w
    P_cell = W @ mdp.transition.reshape(S * A, S)
    R_cell = W @ mdp.reward.reshape(-1)
    P_agg = P_cell[partition.cell_of]
    P_agg /= P_agg.sum(-1, keepdims=True)
    return AggregatedMDP(mdp, partition, w.reshape(S, A), P_agg, R_cell[partition.cell_of])
