"""Off-policy evaluation estimators and their population counterparts.

Every estimator returns an :class:`Estimate`. Finite classes are solved by
exhaustive enumeration, linear classes by closed forms. The ``*_population``
functions evaluate the same losses under exact expectations and serve as
oracles in the tests.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

from .classes import FeatureMap, FiniteClass, LinearClass, PiecewiseConstantClass, span_features
from .data import TrajectoryDataset, TupleDataset
from .mdp import StationaryPolicy, TabularMDP, as_dist, bellman_backup, policy_return, state_values

SIGMA_MIN_FLOOR = 1e-10


class CoverageViolationError(ValueError):
    pass


class IllConditionedError(np.linalg.LinAlgError):
    pass


@dataclass
class Estimate:
    point: float
    lower: Optional[float] = None
    upper: Optional[float] = None
    diagnostics: dict = field(default_factory=dict)


def initial_value(f: np.ndarray, policy: StationaryPolicy, d0: np.ndarray) -> float:
    """J_f(pi) = E_{s ~ d0}[f(s, pi)]."""
    return float(np.asarray(d0) @ state_values(f, policy))


def _pair_index(tuples: TupleDataset) -> np.ndarray:
    return tuples.states * tuples.n_actions + tuples.actions


# ---------------------------------------------------------------------------
# importance sampling


def is_estimate(td: TrajectoryDataset, policy: StationaryPolicy, behavior: Optional[StationaryPolicy] = None,
                mode: str = "plain") -> Estimate:
    """Trajectory-wise importance sampling; ``mode='weighted'`` self-normalizes."""
    behavior = td.behavior if behavior is None else behavior
    mask = td.mask()
    s = np.where(mask, td.states, 0)
    a = np.where(mask, td.actions, 0)
    pb = behavior.probs[s, a]
    bad = mask & (pb <= 0)
    if bad.any():
        i, t = np.argwhere(bad)[0]
        raise CoverageViolationError(f"behavior probability is zero at (s={s[i, t]}, a={a[i, t]})")
    ratio = np.where(mask, policy.probs[s, a] / np.where(mask, pb, 1.0), 1.0)
    weights = ratio.prod(axis=1)
    disc = td.gamma ** np.arange(td.horizon)
    returns = (np.where(mask, td.rewards, 0.0) * disc).sum(axis=1)
    vals = weights * returns
    if mode == "plain":
        point = float(vals.mean())
    elif mode == "weighted":
        tot = weights.sum()
        point = float(vals.sum() / tot) if tot > 0 else 0.0
    else:
        raise ValueError("mode must be 'plain' or 'weighted'")
    diag = {
        "max_weight": float(weights.max()),
        "mean_weight": float(weights.mean()),
        "weight_var": float(weights.var()),
        "is_var": float(vals.var(ddof=1)) if len(vals) > 1 else 0.0,
    }
    return Estimate(point, diagnostics=diag)


# ---------------------------------------------------------------------------
# fitted Q evaluation


def fqe(cls, tuples: TupleDataset, policy: StationaryPolicy, K: int, ridge: float = 0.0,
        d0: Optional[np.ndarray] = None):
    """K regressions onto targets r + gamma f_{k-1}(s', pi), starting from f_0 = 0."""
    if K < 1:
        raise ValueError("K must be >= 1")
    f = np.zeros((tuples.n_states, tuples.n_actions))
    iterates, change = [], []
    for _ in range(K):
        y = tuples.rewards + tuples.gamma * state_values(f, policy)[tuples.next_states]
        g = cls.fit(tuples, y, ridge)
        change.append(float(np.abs(g - f).max()))
        iterates.append(g)
        f = g
    point = initial_value(f, policy, d0) if d0 is not None else math.nan
    return iterates, Estimate(point, diagnostics={"iterations": K, "sup_change": change})


def fqe_population(cls, mdp: TabularMDP, policy: StationaryPolicy, weighting, K: int,
                   f0: Optional[np.ndarray] = None, ridge: float = 0.0):
    """Projected iteration f_k = Proj_w(T^pi f_{k-1}) under exact expectations."""
    f = np.zeros((mdp.n_states, mdp.n_actions)) if f0 is None else np.asarray(f0, float)
    iterates = [f]
    for _ in range(K):
        f = cls.project(bellman_backup(mdp, f, policy), weighting, ridge)
        iterates.append(f)
    norms = [float(np.abs(x).max()) for x in iterates]
    return iterates, Estimate(policy_return(mdp, policy, f), diagnostics={"sup_norm": norms})


# ---------------------------------------------------------------------------
# population losses


def td_loss_population(mdp: TabularMDP, d_D, f_prime: np.ndarray, f: np.ndarray, policy: StationaryPolicy) -> float:
    """L(f'; f, pi) = E_{d_D}[(f'(s,a) - r - gamma f(s', pi))^2] with exact expectations."""
    v = state_values(f, policy)
    resid = f_prime[:, :, None] - mdp.reward[:, :, None] - mdp.gamma * v[None, None, :]
    per_pair = (mdp.transition * resid**2).sum(-1)
    if mdp.reward_noise is not None:
        per_pair = per_pair + mdp.reward_noise.second_moment() - mdp.reward**2
    return float((as_dist(d_D) * per_pair).sum())


def bellman_error_population(mdp: TabularMDP, d_D, f: np.ndarray, policy: StationaryPolicy) -> float:
    """E(f; pi) = ||f - T^pi f||^2 under d_D."""
    return float((as_dist(d_D) * (f - bellman_backup(mdp, f, policy)) ** 2).sum())


def mql_loss_population(mdp: TabularMDP, d_D, w: np.ndarray, f: np.ndarray, policy: StationaryPolicy) -> float:
    return abs(float((as_dist(d_D) * w * (f - bellman_backup(mdp, f, policy))).sum())) / (1 - mdp.gamma)


def mwl_loss_population(mdp: TabularMDP, d_D, w: np.ndarray, f: np.ndarray, policy: StationaryPolicy) -> float:
    v = state_values(f, policy)
    drift = mdp.gamma * mdp.transition @ v - f
    return abs(float(mdp.init_dist @ v + (as_dist(d_D) * w * drift).sum() / (1 - mdp.gamma)))


# ---------------------------------------------------------------------------
# Bellman residual minimization


@dataclass
class CorrectedLosses:
    own: np.ndarray  # L(f; f, pi) per member of F
    best: np.ndarray  # min_g L(g; f, pi)

    @property
    def excess(self) -> np.ndarray:
        return self.own - self.best


def _best_in_class(clsG, tuples: TupleDataset, Ysum: np.ndarray, sumy2: np.ndarray, targets, ridge: float):
    """min_g mean (g(s,a) - y)^2 for each target column."""
    n = len(tuples)
    cnt = tuples.pair_counts().reshape(-1)
    if isinstance(clsG, FiniteClass):
        Gf = clsG.members.reshape(len(clsG), -1)
        L = ((Gf**2) @ cnt)[:, None] - 2 * Gf @ Ysum + sumy2[None, :]
        return L.min(axis=0) / n
    if isinstance(clsG, PiecewiseConstantClass):
        c = clsG.partition.cell_of.reshape(-1)
        k = clsG.partition.n_cells
        ccnt = np.bincount(c, weights=cnt, minlength=k)
        csum = np.stack([np.bincount(c, weights=col, minlength=k) for col in Ysum.T], axis=1)
        fitted = np.divide(csum**2, ccnt[:, None], out=np.zeros_like(csum), where=ccnt[:, None] > 0)
        return (sumy2 - fitted.sum(axis=0)) / n
    out = []
    for y in targets:
        g = clsG.fit(tuples, y, ridge)
        out.append(np.mean((g[tuples.states, tuples.actions] - y) ** 2))
    return np.array(out)


def corrected_losses(classF: FiniteClass, tuples: TupleDataset, policy: StationaryPolicy, classG=None,
                     ridge: float = 0.0) -> CorrectedLosses:
    """Own and best-response squared TD losses for every member of a finite F.

    Members sharing the same next-state values f(., pi) share targets, so the
    best response is computed once per distinct target vector.
    """
    classG = classF if classG is None else classG
    n = len(tuples)
    idx = _pair_index(tuples)
    SA = tuples.n_states * tuples.n_actions
    if tuples.gamma == 0:
        # next-state values drop out of every target
        uniq, group = np.zeros((1, tuples.n_states)), np.zeros(len(classF), dtype=np.int64)
    else:
        nv = np.einsum("msa,sa->ms", classF.members, policy.probs)
        uniq, group = np.unique(nv, axis=0, return_inverse=True)
        group = group.reshape(-1)
    targets = tuples.rewards[None, :] + tuples.gamma * uniq[:, tuples.next_states]  # (U, n)
    Ysum = np.stack([np.bincount(idx, weights=y, minlength=SA) for y in targets], axis=1)  # (SA, U)
    sumy2 = (targets**2).sum(axis=1)
    best = _best_in_class(classG, tuples, Ysum, sumy2, targets, ridge)[group]
    cnt = tuples.pair_counts().reshape(-1)
    Ff = classF.members.reshape(len(classF), -1)
    own = ((Ff**2) @ cnt - 2 * np.einsum("mk,km->m", Ff, Ysum[:, group]) + sumy2[group]) / n
    return CorrectedLosses(own, np.minimum(best, own) if classG is classF else best)


def brm(classF, tuples: TupleDataset, policy: StationaryPolicy, classG=None, d0=None, ridge: float = 0.0):
    """Minimize the double-sampling-corrected loss max_g [L(f;f) - L(g;f)]."""
    if isinstance(classF, FiniteClass):
        cl = corrected_losses(classF, tuples, policy, classG, ridge)
        i = int(np.argmin(cl.excess))
        f = classF.members[i]
        point = initial_value(f, policy, d0) if d0 is not None else math.nan
        return f, Estimate(point, diagnostics={"corrected_loss": float(cl.excess[i]), "index": i})
    feats = span_features(classF)
    if classG is not None and classG is not classF:
        raise ValueError("linear BRM is closed-form only for a shared class")
    theta, est = lstdq(feats, tuples, policy, ridge, d0)
    est.diagnostics["corrected_loss"] = 0.0
    return feats.features @ theta, est


# ---------------------------------------------------------------------------
# LSTDQ


def _design(features: FeatureMap, tuples: TupleDataset, policy: StationaryPolicy):
    Phi = features.features[tuples.states, tuples.actions]
    Phi_next = features.next_policy_features(policy)[tuples.next_states]
    return Phi, Phi_next


def lstdq_system(features: FeatureMap, tuples: TupleDataset, policy: StationaryPolicy):
    """(A_hat, B_hat, Sigma_hat) with A = E[phi (phi - gamma phi')^T], B = E[phi r]."""
    n = len(tuples)
    Phi, Phi_next = _design(features, tuples, policy)
    A = Phi.T @ (Phi - tuples.gamma * Phi_next) / n
    B = Phi.T @ tuples.rewards / n
    Sigma = Phi.T @ Phi / n
    return A, B, 0.5 * (Sigma + Sigma.T)


def lstdq(features: FeatureMap, tuples: TupleDataset, policy: StationaryPolicy, ridge: float = 0.0, d0=None):
    A, B, _ = lstdq_system(features, tuples, policy)
    A = A + ridge * np.eye(features.dim)
    smin = float(np.linalg.svd(A, compute_uv=False)[-1])
    if smin < SIGMA_MIN_FLOOR:
        raise IllConditionedError(f"sigma_min(A) = {smin:.3g} < {SIGMA_MIN_FLOOR}")
    theta = np.linalg.solve(A, B)
    point = initial_value(features.features @ theta, policy, d0) if d0 is not None else math.nan
    return theta, Estimate(point, diagnostics={"sigma_min_A": smin})


def lstdq_population(features: FeatureMap, mdp: TabularMDP, policy: StationaryPolicy, d_D):
    """Population (A, Sigma_D) for the diagnostics of the fixed-point system."""
    d = as_dist(d_D)
    phi = features.features
    nxt = np.einsum("sap,pd->sad", mdp.transition, features.next_policy_features(policy))
    A = np.einsum("sa,sad,sae->de", d, phi, phi - mdp.gamma * nxt)
    return A, features.gram(d)


# ---------------------------------------------------------------------------
# minimax weight / value learning


def _linear_or_none(cls) -> Optional[FeatureMap]:
    return None if isinstance(cls, FiniteClass) else span_features(cls)


def _solve_square_or_lstsq(M: np.ndarray, b: np.ndarray) -> np.ndarray:
    if M.shape[0] == M.shape[1]:
        return np.linalg.solve(M, b)
    return np.linalg.lstsq(M, b, rcond=None)[0]


def _per_pair_sums(tuples: TupleDataset, cols: np.ndarray) -> np.ndarray:
    """Sum of each column of ``cols`` (n, m) grouped by (s, a); shape (SA, m)."""
    SA = tuples.n_states * tuples.n_actions
    idx = _pair_index(tuples)
    return np.stack([np.bincount(idx, weights=c, minlength=SA) for c in cols.T], axis=1)


def mql_losses(classF: FiniteClass, classW: FiniteClass, tuples: TupleDataset, policy: StationaryPolicy) -> np.ndarray:
    """|E_D[w (f - r - gamma f(s', pi))]| / (1 - gamma) as a (|W|, |F|) matrix."""
    nv = np.einsum("msa,sa->ms", classF.members, policy.probs)
    delta = (classF.members[:, tuples.states, tuples.actions] - tuples.rewards[None, :]
             - tuples.gamma * nv[:, tuples.next_states])
    D = _per_pair_sums(tuples, delta.T)
    Wf = classW.members.reshape(len(classW), -1)
    return np.abs(Wf @ D) / len(tuples) / (1 - tuples.gamma)


def mql(classF, classW, tuples: TupleDataset, policy: StationaryPolicy, d0):
    """argmin_f max_w |L_q(w, f)|; linear classes use the moment equations directly."""
    fF, fW = _linear_or_none(classF), _linear_or_none(classW)
    if fF is not None and fW is not None:
        Phi, Phi_next = _design(fF, tuples, policy)
        Psi = fW.features[tuples.states, tuples.actions]
        n = len(tuples)
        M = Psi.T @ (Phi - tuples.gamma * Phi_next) / n
        theta = _solve_square_or_lstsq(M, Psi.T @ tuples.rewards / n)
        f = fF.features @ theta
        return f, Estimate(initial_value(f, policy, d0), diagnostics={"max_loss": 0.0})
    L = mql_losses(classF, classW, tuples, policy)
    worst = L.max(axis=0)
    i = int(np.argmin(worst))
    f = classF.members[i]
    return f, Estimate(initial_value(f, policy, d0), diagnostics={"max_loss": float(worst[i]), "index": i})


def mwl_losses(classW: FiniteClass, classF: FiniteClass, tuples: TupleDataset, policy: StationaryPolicy, d0) -> np.ndarray:
    """|E_d0[f(s, pi)] + E_D[w (gamma f(s', pi) - f(s, a))] / (1 - gamma)| as a (|W|, |F|) matrix."""
    nv = np.einsum("msa,sa->ms", classF.members, policy.probs)
    drift = tuples.gamma * nv[:, tuples.next_states] - classF.members[:, tuples.states, tuples.actions]
    D = _per_pair_sums(tuples, drift.T)
    Wf = classW.members.reshape(len(classW), -1)
    start = nv @ np.asarray(d0)
    return np.abs(start[None, :] + Wf @ D / len(tuples) / (1 - tuples.gamma))


def mwl(classW, classF, tuples: TupleDataset, policy: StationaryPolicy, d0):
    """argmin_w max_f |L_w(w, f)|; estimate E_D[w r] / (1 - gamma)."""
    fW, fF = _linear_or_none(classW), _linear_or_none(classF)
    n = len(tuples)
    if fW is not None and fF is not None:
        Phi, Phi_next = _design(fF, tuples, policy)
        Psi = fW.features[tuples.states, tuples.actions]
        C = (tuples.gamma * Phi_next - Phi).T @ Psi / n
        nu = fF.next_policy_features(policy).T @ np.asarray(d0)
        beta = _solve_square_or_lstsq(C, -(1 - tuples.gamma) * nu)
        w = fW.features @ beta
        diag = {"max_loss": 0.0}
    else:
        L = mwl_losses(classW, classF, tuples, policy, d0)
        worst = L.max(axis=1)
        i = int(np.argmin(worst))
        w = classW.members[i]
        diag = {"max_loss": float(worst[i]), "index": i}
    point = float(np.mean(w[tuples.states, tuples.actions] * tuples.rewards) / (1 - tuples.gamma))
    return w, Estimate(point, diagnostics=diag)


# ---------------------------------------------------------------------------
# maximum-likelihood models


@dataclass
class ModelFit:
    model: TabularMDP
    log_losses: Optional[np.ndarray]
    mle_index: Optional[int]
    l1_error: Optional[float] = None  # max over (s, a) of ||P - P_hat||_1 when truth is known


def log_loss(transition: np.ndarray, tuples: TupleDataset) -> float:
    p = transition[tuples.states, tuples.actions, tuples.next_states]
    if (p <= 0).any():
        return math.inf
    return float(-np.log(p).mean())


def empirical_reward(tuples: TupleDataset) -> np.ndarray:
    cnt = tuples.pair_counts().reshape(-1)
    tot = np.bincount(_pair_index(tuples), weights=tuples.rewards, minlength=cnt.size)
    return np.divide(tot, cnt, out=np.zeros_like(tot), where=cnt > 0).reshape(tuples.n_states, tuples.n_actions)


def mle_model(tuples: TupleDataset, d0, candidates: Optional[Sequence[np.ndarray]] = None,
              reward: Optional[np.ndarray] = None, truth: Optional[TabularMDP] = None) -> ModelFit:
    """Finite candidates: argmin log-loss. Without candidates: count-based estimate, unseen rows uniform."""
    S, A = tuples.n_states, tuples.n_actions
    R = empirical_reward(tuples) if reward is None else np.asarray(reward, float)
    if candidates is None:
        counts = np.zeros((S * A, S))
        np.add.at(counts, (_pair_index(tuples), tuples.next_states), 1.0)
        tot = counts.sum(1, keepdims=True)
        P = np.where(tot > 0, counts / np.where(tot > 0, tot, 1), 1.0 / S).reshape(S, A, S)
        losses, idx = None, None
    else:
        losses = np.array([log_loss(np.asarray(c), tuples) for c in candidates])
        idx = int(np.argmin(losses))
        P = np.asarray(candidates[idx], float)
    model = TabularMDP(P, R, tuples.gamma, np.asarray(d0, float), tuples.r_max)
    l1 = None if truth is None else float(np.abs(truth.transition - P).sum(-1).max())
    return ModelFit(model, losses, idx, l1)


def mle_estimate(tuples: TupleDataset, policy: StationaryPolicy, d0) -> Estimate:
    fit = mle_model(tuples, d0)
    return Estimate(policy_return(fit.model, policy))


@dataclass
class ModelVersionSpace:
    candidates: list
    log_losses: np.ndarray
    threshold: float
    mle_index: int

    @property
    def member_flags(self) -> np.ndarray:
        flags = self.log_losses <= self.log_losses[self.mle_index] + self.threshold
        flags[self.mle_index] = True
        return flags


def model_version_space(candidates: Sequence[np.ndarray], tuples: TupleDataset, delta: float,
                        c: float = 2.0) -> ModelVersionSpace:
    """Candidates whose log-loss is within c log(|P|/delta)/n of the best one."""
    losses = np.array([log_loss(np.asarray(p), tuples) for p in candidates])
    thr = c * math.log(len(candidates) / delta) / max(len(tuples), 1)
    return ModelVersionSpace(list(candidates), losses, thr, int(np.argmin(losses)))


# ---------------------------------------------------------------------------
# version spaces


@dataclass
class VersionSpace:
    base_class: FiniteClass
    member_flags: np.ndarray
    threshold: float
    policy: StationaryPolicy
    losses: np.ndarray  # corrected loss per member
    slack: float  # the statistical part of the threshold

    @property
    def argmin(self) -> int:
        return int(np.argmin(self.losses))

    @property
    def members(self) -> np.ndarray:
        return self.base_class.members[self.member_flags]


def vs_slack(v_max: float, class_size: int, n_policies: int, delta: float, n: int, c: float = 2.0) -> float:
    return c * v_max**2 * math.log(class_size * n_policies / delta) / n


def version_space(classF: FiniteClass, tuples: TupleDataset, policy: StationaryPolicy, delta: float,
                  c: float = 2.0, n_policies: int = 1, classG=None) -> VersionSpace:
    """Members whose corrected loss is within c v_max^2 log(|F||Pi|/delta)/n of the minimum."""
    losses = corrected_losses(classF, tuples, policy, classG).excess
    slack = vs_slack(tuples.v_max, len(classF), n_policies, delta, max(len(tuples), 1), c)
    thr = float(losses.min() + slack)
    flags = losses <= thr
    return VersionSpace(classF, flags, thr, policy, losses, slack)


def vs_interval(vs: VersionSpace, d0) -> Estimate:
    J = np.einsum("msa,sa,s->m", vs.base_class.members, vs.policy.probs, np.asarray(d0, float))
    inside = J[vs.member_flags]
    return Estimate(
        float(J[vs.argmin]),
        float(inside.min()),
        float(inside.max()),
        {"threshold": vs.threshold, "size": int(vs.member_flags.sum())},
    )


ESTIMATORS = ("is", "wis", "fqe", "brm", "lstdq", "mql", "mwl", "mle")
