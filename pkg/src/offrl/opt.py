"""Policy optimization from offline data: greedy fitted methods and pessimistic ones."""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

from .classes import FeatureMap, FiniteClass, span_features
from .data import TupleDataset
from .mdp import (
    MixturePolicy,
    NonstationaryPolicy,
    StationaryPolicy,
    TabularMDP,
    greedy,
    policy_return,
    solve_q,
    state_values,
    truncated_return,
)
from .ope import (
    Estimate,
    fqe,
    initial_value,
    lstdq_system,
    model_version_space,
    version_space,
    vs_interval,
)

log = logging.getLogger(__name__)


@dataclass
class OptResult:
    policy: object
    value_estimate: Estimate
    truth_gap: Optional[float] = None
    trace: dict = field(default_factory=dict)

    def attach_oracle(self, mdp: TabularMDP, comparator, horizon: Optional[int] = None) -> "OptResult":
        """Set truth_gap = J(comparator) - J(policy); with ``horizon`` both are K-step returns."""
        if horizon is None:
            self.truth_gap = policy_return(mdp, comparator) - policy_return(mdp, self.policy)
        else:
            self.truth_gap = truncated_return(mdp, comparator, horizon) - truncated_return(mdp, self.policy, horizon)
        return self


def _finish(res: OptResult, mdp, comparator, horizon=None) -> OptResult:
    if mdp is not None and comparator is not None:
        res.attach_oracle(mdp, comparator, horizon)
    return res


# ---------------------------------------------------------------------------
# greedy fitted methods


def fqi(classF, tuples: TupleDataset, K: int, ridge: float = 0.0, d0=None, mdp=None, comparator=None) -> OptResult:
    """K optimality-backup regressions from f_0 = 0, then act greedily."""
    if K < 1:
        raise ValueError("K must be >= 1")
    f = np.zeros((tuples.n_states, tuples.n_actions))
    for _ in range(K):
        y = tuples.rewards + tuples.gamma * f.max(axis=1)[tuples.next_states]
        f = classF.fit(tuples, y, ridge)
    pi = greedy(f)
    point = initial_value(f, pi, d0) if d0 is not None else math.nan
    return _finish(OptResult(pi, Estimate(point), trace={"f": f}), mdp, comparator)


def fpi(classF, tuples: TupleDataset, K: int, evaluation: str = "fqe", fqe_iters: int = 100, ridge: float = 0.0,
        d0=None, mdp: Optional[TabularMDP] = None, comparator=None) -> OptResult:
    """Policy iteration with FQE (or, in ``evaluation='exact'`` mode, oracle) evaluation."""
    if K < 1:
        raise ValueError("K must be >= 1")
    if evaluation == "exact" and mdp is None:
        raise ValueError("exact evaluation needs an oracle mdp")
    pi = StationaryPolicy.uniform(tuples.n_states, tuples.n_actions)
    history = [pi]
    for _ in range(K):
        if evaluation == "exact":
            q = solve_q(mdp, pi)
        else:
            q = fqe(classF, tuples, pi, fqe_iters, ridge)[0][-1]
        pi = greedy(q)
        history.append(pi)
    point = initial_value(q, history[-2], d0) if d0 is not None else math.nan
    trace = {"policies": history}
    if mdp is not None:
        trace["returns"] = [policy_return(mdp, p) for p in history]
    return _finish(OptResult(pi, Estimate(point), trace=trace), mdp, comparator)


# ---------------------------------------------------------------------------
# version-space pessimism


def pessimistic_search(policies: Sequence, classF: FiniteClass, tuples: TupleDataset, delta: float, d0,
                       c: float = 2.0, classG=None, mdp=None, comparator=None) -> OptResult:
    """argmax over a finite policy list of the version-space lower bound (ties to the first)."""
    intervals = []
    for pi in policies:
        vs = version_space(classF, tuples, pi, delta, c=c, n_policies=len(policies), classG=classG)
        intervals.append(vs_interval(vs, d0))
    lowers = np.array([e.lower for e in intervals])
    i = int(np.argmax(lowers))
    res = OptResult(policies[i], intervals[i], trace={"index": i, "intervals": intervals})
    return _finish(res, mdp, comparator)


@dataclass
class FMin:
    values: np.ndarray
    J: float
    loss: float
    lam: Optional[float] = None
    feasible: bool = True


def linear_excess_loss(features: FeatureMap, tuples: TupleDataset, policy: StationaryPolicy, ridge: float = 1e-10):
    """Closed-form corrected loss of the linear class: theta -> (A theta - B)^T Sigma^-1 (A theta - B)."""
    A, B, Sigma = lstdq_system(features, tuples, policy)
    Sinv = np.linalg.inv(Sigma + ridge * np.eye(features.dim))

    def loss(theta: np.ndarray) -> float:
        r = A @ theta - B
        return float(r @ Sinv @ r)

    return A, B, Sigma + ridge * np.eye(features.dim), loss


def default_lambda_grid() -> np.ndarray:
    return np.logspace(-4, 8, 241)


def f_min_oracle(classF, tuples: TupleDataset, policy: StationaryPolicy, d0, epsilon0: Optional[float] = None,
                 lambda_grid=None, delta: float = 0.05, c: float = 2.0, n_policies: int = 1, classG=None) -> FMin:
    """Member of the version space with the smallest J_f(pi).

    ``epsilon0`` is the full threshold on the corrected loss; when omitted the
    version-space rule is used (finite) or c v_max^2 (d log(1+n) + log(1/delta))/n (linear).
    """
    if isinstance(classF, FiniteClass):
        vs = version_space(classF, tuples, policy, delta, c=c, n_policies=n_policies, classG=classG)
        flags = vs.member_flags if epsilon0 is None else vs.losses <= max(epsilon0, vs.losses.min())
        J = np.einsum("msa,sa,s->m", classF.members, policy.probs, np.asarray(d0, float))
        J_in = np.where(flags, J, np.inf)
        i = int(np.argmin(J_in))
        return FMin(classF.members[i], float(J[i]), float(vs.losses[i]))

    feats = span_features(classF)
    n = len(tuples)
    if epsilon0 is None:
        epsilon0 = c * tuples.v_max**2 * (feats.dim * math.log(1 + n) + math.log(1 / delta)) / n
    A, B, Sigma, loss = linear_excess_loss(feats, tuples, policy)
    nu = feats.next_policy_features(policy).T @ np.asarray(d0)
    grid = np.sort(np.asarray(default_lambda_grid() if lambda_grid is None else lambda_grid, float))
    # theta(lam) = A^-1 (B - Sigma A^-T nu / (2 lam))
    base = np.linalg.solve(A, B)
    tilt = np.linalg.solve(A, Sigma @ np.linalg.solve(A.T, nu))
    best = None
    for lam in grid:
        theta = base - tilt / (2 * lam)
        L = loss(theta)
        if L <= epsilon0 and (best is None or L > best[1]):
            best = (lam, L, theta)
    feasible = best is not None
    if not feasible:
        log.warning("no lambda in the grid meets epsilon0=%g; using the largest", epsilon0)
        lam = grid[-1]
        theta = base - tilt / (2 * lam)
        best = (lam, loss(theta), theta)
    lam, L, theta = best
    f = feats.features @ theta
    return FMin(f, initial_value(f, policy, d0), L, float(lam), feasible)


def softmax_policy(logits: np.ndarray) -> StationaryPolicy:
    z = logits - logits.max(axis=1, keepdims=True)
    p = np.exp(z)
    return StationaryPolicy(p / p.sum(axis=1, keepdims=True))


def pspi_eta(gamma: float, v_max: float, n_actions: int, K: int) -> float:
    return (1 - gamma) / v_max * math.sqrt(math.log(n_actions) / (2 * K))


def pspi(classF, tuples: TupleDataset, K: int, d0, eta: Optional[float] = None, delta: float = 0.05,
         c: float = 2.0, epsilon0: Optional[float] = None, lambda_grid=None, classG=None,
         n_policies: int = 1, mdp=None, comparator=None) -> OptResult:
    """Mirror descent against pessimistic value estimates; returns the uniform mixture of iterates.

    ``n_policies`` sizes the union bound of each iterate's version space. It
    defaults to 1 so the threshold does not move with K; pass K to cover the
    iterates jointly.
    """
    if K < 1:
        raise ValueError("K must be >= 1")
    S, A = tuples.n_states, tuples.n_actions
    eta = pspi_eta(tuples.gamma, tuples.v_max, A, K) if eta is None else eta
    if eta <= 0:
        raise ValueError("eta must be positive")
    logits = np.zeros((S, A))
    policies, fs = [], []
    for _ in range(K):
        pi = softmax_policy(logits)
        policies.append(pi)
        fm = f_min_oracle(classF, tuples, pi, d0, epsilon0, lambda_grid, delta, c, n_policies, classG)
        fs.append(fm.values)
        logits = logits + eta * fm.values
    mix = MixturePolicy.uniform(policies)
    est = Estimate(float(np.mean([initial_value(f, p, d0) for f, p in zip(fs, policies)])))
    return _finish(OptResult(mix, est, trace={"policies": policies, "f": fs, "eta": eta}), mdp, comparator)


# ---------------------------------------------------------------------------
# PEVI


def pevi_beta(v_max: float, dim: int, n: int, delta: float, c: float = 1.0) -> float:
    return c * v_max * math.sqrt(dim * math.log(n * dim / delta))


def pevi(features: FeatureMap, tuples: TupleDataset, K: int, beta: Optional[float] = None, ridge: float = 1.0,
         delta: float = 0.05, c_beta: float = 1.0, d0=None, mdp=None, comparator=None) -> OptResult:
    """Pessimistic value iteration with elliptical bonuses; returns pi_{K:1}.

    Iterates are clipped to [-v_max, v_max]. The bonus is
    beta / sqrt(n) * sqrt(phi^T Sigma_ridge^-1 phi) with Sigma_ridge = (Phi^T Phi + ridge I) / n.
    """
    if K < 1:
        raise ValueError("K must be >= 1")
    n = len(tuples)
    v_max = tuples.v_max
    beta = pevi_beta(v_max, features.dim, n, delta, c_beta) if beta is None else beta
    Phi = features.features[tuples.states, tuples.actions]
    Ginv = np.linalg.inv(Phi.T @ Phi + ridge * np.eye(features.dim))
    phi = features.features
    bonus = beta * np.sqrt(np.maximum(np.einsum("sad,de,sae->sa", phi, Ginv, phi), 0.0))
    f = np.zeros((tuples.n_states, tuples.n_actions))
    iterates, steps = [], []
    for _ in range(K):
        y = tuples.rewards + tuples.gamma * f.max(axis=1)[tuples.next_states]
        theta = Ginv @ (Phi.T @ y)
        f = np.clip(phi @ theta - bonus, -v_max, v_max)
        iterates.append(f)
        steps.append(greedy(f))
    pi = NonstationaryPolicy(tuple(steps))
    point = float(np.asarray(d0) @ f.max(axis=1)) if d0 is not None else math.nan
    res = OptResult(pi, Estimate(point), trace={"f_minus": iterates, "bonus": bonus, "beta": beta})
    return _finish(res, mdp, comparator, horizon=K)


# ---------------------------------------------------------------------------
# model-based pessimism


def model_pessimism(candidates: Sequence[np.ndarray], policies: Sequence, tuples: TupleDataset, delta: float, d0,
                    reward: np.ndarray, mode: str = "absolute", pi_ref=None, c: float = 2.0,
                    mdp=None, comparator=None) -> OptResult:
    """Worst case over the model version space of J(pi) (absolute) or J(pi) - J(pi_ref) (relative).

    In relative mode ``pi_ref`` is appended to the policy list when absent, so
    the chosen policy's worst-case improvement is never negative.
    """
    vs = model_version_space(candidates, tuples, delta, c)
    models = [
        TabularMDP(np.asarray(P, float), reward, tuples.gamma, np.asarray(d0, float), tuples.r_max)
        for P, keep in zip(vs.candidates, vs.member_flags)
        if keep
    ]
    policies = list(policies)
    if mode == "relative":
        if pi_ref is None:
            raise ValueError("relative mode needs pi_ref")
        if not any(p is pi_ref for p in policies):
            policies.append(pi_ref)
    elif mode != "absolute":
        raise ValueError("mode must be 'absolute' or 'relative'")
    J = np.array([[policy_return(m, p) for p in policies] for m in models])
    if mode == "relative":
        J_ref = np.array([policy_return(m, pi_ref) for m in models])
        J = J - J_ref[:, None]
    worst = J.min(axis=0)
    i = int(np.argmax(worst))
    trace = {"index": i, "worst": worst, "version_space": vs, "policies": policies}
    return _finish(OptResult(policies[i], Estimate(float(worst[i])), trace=trace), mdp, comparator)


OPTIMIZERS = ("fqi", "fpi", "vs_pess", "pspi", "pevi", "model_pess", "model_pess_rel")
