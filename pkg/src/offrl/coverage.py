"""Coverage coefficients between a target occupancy and a data distribution.

Ratios follow the convention 0/0 = 0 and x/0 = inf for x > 0. Infinity is
returned as ``math.inf``, never as a large sentinel.
"""

from __future__ import annotations

import itertools
import logging
import math
from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np
import scipy.linalg

from .classes import FeatureMap, FiniteClass, span_features
from .mdp import StationaryPolicy, TabularMDP, as_dist, bellman_backup, occupancy

log = logging.getLogger(__name__)

ZERO = 1e-12
WEIGHT_RIDGE = 1e-10


def _ratio(num: float, den: float) -> float:
    if den <= 0:
        return 0.0 if num <= 0 else math.inf
    return num / den


def c_inf(d_pi, d_D) -> float:
    p, q = as_dist(d_pi), as_dist(d_D)
    if ((p > 0) & (q <= 0)).any():
        return math.inf
    mask = q > 0
    return float((p[mask] / q[mask]).max()) if mask.any() else 0.0


def c_inf_per_step(d_pi_steps: Sequence, d_D_steps: Sequence) -> float:
    """Finite-horizon concentrability: worst per-step ratio over all steps."""
    return max(c_inf(p, q) for p, q in zip(d_pi_steps, d_D_steps))


def chi_sq_coverage(d_pi, d_D) -> float:
    """E_{d_D}[(d_pi/d_D)^2] = sum d_pi^2 / d_D."""
    p, q = as_dist(d_pi), as_dist(d_D)
    if ((p > 0) & (q <= 0)).any():
        return math.inf
    mask = q > 0
    return float((p[mask] ** 2 / q[mask]).sum())


def _bellman_residuals(cls: FiniteClass, mdp: TabularMDP, policy: StationaryPolicy) -> np.ndarray:
    res = np.stack([f - bellman_backup(mdp, f, policy) for f in cls.members])
    res[np.abs(res) <= ZERO * max(1.0, mdp.v_max)] = 0.0
    return res


def _pi_and_D(mdp, policy, d_D):
    return occupancy(mdp, policy).dist, as_dist(d_D)


def linear_sq_bound(features: FeatureMap, d_pi, d_D) -> float:
    """sigma_max(Sigma_pi^1/2 Sigma_D^-1 Sigma_pi^1/2), via the generalized eigenproblem."""
    g_pi, g_D = features.gram(d_pi), features.gram(d_D)
    if np.linalg.eigvalsh(g_D)[0] <= ZERO:
        return math.inf
    return float(scipy.linalg.eigh(g_pi, g_D, eigvals_only=True)[-1])


def linear_avg_bound(features: FeatureMap, d_pi, d_D) -> float:
    """E_pi[phi]^T Sigma_D^-1 E_pi[phi]."""
    m, g_D = features.mean(d_pi), features.gram(d_D)
    if np.linalg.eigvalsh(g_D)[0] <= ZERO:
        return math.inf
    return float(m @ np.linalg.solve(g_D, m))


def c_sq(cls, mdp: TabularMDP, policy: StationaryPolicy, d_D) -> float:
    """Worst ratio of squared Bellman-error norms under d_pi and d_D.

    Exact for a finite class; for linear classes the spectral upper bound.
    """
    d_pi, d_d = _pi_and_D(mdp, policy, d_D)
    feats = span_features(cls)
    if feats is not None:
        return linear_sq_bound(feats, d_pi, d_d)
    res = _bellman_residuals(cls, mdp, policy) ** 2
    return max(_ratio((d_pi * r).sum(), (d_d * r).sum()) for r in res)


def c_avg(cls, mdp: TabularMDP, policy: StationaryPolicy, d_D) -> float:
    """Worst ratio of the squared mean Bellman error under d_pi to its second moment under d_D."""
    d_pi, d_d = _pi_and_D(mdp, policy, d_D)
    feats = span_features(cls)
    if feats is not None:
        return linear_avg_bound(feats, d_pi, d_d)
    res = _bellman_residuals(cls, mdp, policy)
    return max(_ratio((d_pi * r).sum() ** 2, (d_d * r**2).sum()) for r in res)


def effective_weight(features: FeatureMap, mdp: TabularMDP, policy: StationaryPolicy, d_D) -> np.ndarray:
    """w(s, a) = phi(s, a)^T Sigma_D^-1 E_{d_pi}[phi]; mean-matches d_pi on the features."""
    d_pi, d_d = _pi_and_D(mdp, policy, d_D)
    g_D = features.gram(d_d)
    if np.linalg.eigvalsh(g_D)[0] <= ZERO:
        log.warning("singular data gram; adding ridge %g", WEIGHT_RIDGE)
        g_D = g_D + WEIGHT_RIDGE * np.eye(features.dim)
    x = np.linalg.solve(g_D, features.mean(d_pi))
    return features.features @ x


@dataclass
class CoverageReport:
    c_inf: float
    c_sq: Optional[float]
    c_avg: Optional[float]
    chi_sq: float
    gram_D: Optional[np.ndarray] = None
    gram_pi: Optional[np.ndarray] = None
    sigma_min_D: Optional[float] = None
    bound_kind: Optional[str] = None  # "exact" for finite classes, "upper_bound" for linear

    def as_row(self) -> dict:
        return {"c_inf": self.c_inf, "c_sq": self.c_sq, "c_avg": self.c_avg, "chi_sq": self.chi_sq}


def coverage_report(mdp: TabularMDP, policy: StationaryPolicy, d_D, cls=None, features: Optional[FeatureMap] = None):
    d_pi = occupancy(mdp, policy).dist
    d_d = as_dist(d_D)
    rep = CoverageReport(c_inf(d_pi, d_d), None, None, chi_sq_coverage(d_pi, d_d))
    if cls is not None:
        rep.c_sq = c_sq(cls, mdp, policy, d_d)
        rep.c_avg = c_avg(cls, mdp, policy, d_d)
        rep.bound_kind = "exact" if isinstance(cls, FiniteClass) else "upper_bound"
    feats = features if features is not None else (span_features(cls) if cls is not None else None)
    if feats is not None:
        rep.gram_D = feats.gram(d_d)
        rep.gram_pi = feats.gram(d_pi)
        rep.sigma_min_D = float(np.linalg.eigvalsh(rep.gram_D)[0])
    return rep


# ---------------------------------------------------------------------------
# designs


def barycentric_spanner(vectors: np.ndarray, tol: float = 1e-12) -> list:
    """Indices of a barycentric spanner of the rows of ``vectors``.

    Every row is a combination of the returned rows with coefficients in
    [-1, 1]. Works in an orthonormal basis of the row span and swaps rows in
    while the absolute determinant strictly grows.
    """
    X = np.asarray(vectors, dtype=float)
    _, sv, vt = np.linalg.svd(X, full_matrices=False)
    r = int((sv > tol * sv[0]).sum())
    Y = X @ vt[:r].T  # coordinates in the span, (m, r)
    chosen: list = []
    basis = np.eye(r)
    for i in range(r):
        best = None
        for j in range(len(Y)):
            M = basis.copy()
            M[i] = Y[j]
            det = abs(np.linalg.det(M))
            if best is None or det > best[0]:
                best = (det, j)
        basis[i] = Y[best[1]]
        chosen.append(best[1])
    improved = True
    while improved:
        improved = False
        cur = abs(np.linalg.det(basis))
        for i, j in itertools.product(range(r), range(len(Y))):
            M = basis.copy()
            M[i] = Y[j]
            if abs(np.linalg.det(M)) > cur * (1 + 1e-9):
                basis, chosen[i] = M, j
                improved = True
                break
    return chosen


def spanner_design(mdp: TabularMDP, policies: Sequence[StationaryPolicy]) -> np.ndarray:
    """Uniform mixture of the state occupancies of a spanner subset, with uniform actions."""
    states = np.stack([occupancy(mdp, p).state_marginal() for p in policies])
    idx = barycentric_spanner(states)
    mix = states[idx].mean(axis=0)
    return np.repeat(mix[:, None] / mdp.n_actions, mdp.n_actions, axis=1)


def simplex_grid(k: int, resolution: int) -> np.ndarray:
    """All points of the k-simplex with coordinates in multiples of 1/resolution."""
    pts = []
    for bars in itertools.combinations(range(resolution + k - 1), k - 1):
        edges = (-1,) + bars + (resolution + k - 1,)
        pts.append([edges[i + 1] - edges[i] - 1 for i in range(k)])
    return np.array(pts, dtype=float) / resolution
