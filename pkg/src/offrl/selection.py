"""Selecting among candidate Q-functions with pairwise discretized comparisons."""

from __future__ import annotations

import itertools
import math
import warnings
from dataclasses import dataclass

import numpy as np

from .classes import PiecewiseConstantClass, bvft_partition, discretize
from .data import TupleDataset
from .mdp import StationaryPolicy, TabularMDP, as_dist, bellman_backup, state_values


@dataclass
class SelectionReport:
    winner_index: int
    pairwise_losses: np.ndarray  # [i, j] = residual of candidate i in its comparison with j
    partitions_used: np.ndarray  # [i, j] = cell count of the (i, j) partition

    @property
    def worst_case(self) -> np.ndarray:
        off = self.pairwise_losses.copy()
        np.fill_diagonal(off, -np.inf)
        return off.max(axis=1)


def cell_bound(eps: float, v_max: float) -> int:
    return (math.ceil(v_max / eps) + 1) ** 2


def _clip(f: np.ndarray, v_max: float) -> np.ndarray:
    f = np.asarray(f, dtype=float)
    if f.min() < 0 or f.max() > v_max:
        warnings.warn("candidate clipped into [0, v_max]", stacklevel=3)
        f = np.clip(f, 0.0, v_max)
    return f


def _residual(fbar: np.ndarray, part, tuples: TupleDataset, policy: StationaryPolicy) -> float:
    y = tuples.rewards + tuples.gamma * state_values(fbar, policy)[tuples.next_states]
    g = PiecewiseConstantClass(part).fit(tuples, y)
    diff = fbar[tuples.states, tuples.actions] - g[tuples.states, tuples.actions]
    return float(np.sqrt(np.mean(diff**2)))


def bvft_pair(f1, f2, tuples: TupleDataset, policy: StationaryPolicy, eps: float, v_max: float):
    """Return (chosen index, (residual_1, residual_2), n_cells); ties pick f1 (index 0)."""
    f1, f2 = _clip(f1, v_max), _clip(f2, v_max)
    part = bvft_partition(f1, f2, eps, v_max)
    res = tuple(_residual(discretize(f, eps, v_max), part, tuples, policy) for f in (f1, f2))
    return (0 if res[0] <= res[1] else 1), res, part.n_cells


def population_residual(f: np.ndarray, other: np.ndarray, mdp: TabularMDP, policy: StationaryPolicy, d_D,
                        eps: float, v_max: float) -> float:
    """Exact-expectation version of the pairwise residual, for use as an oracle."""
    f, other = np.clip(f, 0, v_max), np.clip(other, 0, v_max)
    part = bvft_partition(f, other, eps, v_max)
    fbar = discretize(f, eps, v_max)
    proj = PiecewiseConstantClass(part).project(bellman_backup(mdp, fbar, policy), d_D)
    return float(np.sqrt((as_dist(d_D) * (fbar - proj) ** 2).sum()))


def bvft_tournament(candidates, tuples: TupleDataset, policy: StationaryPolicy, eps: float, v_max: float):
    """Winner minimizes its worst residual over all pairwise comparisons (ties to the lowest index)."""
    m = len(candidates)
    if m < 2:
        raise ValueError("need at least two candidates")
    L = np.zeros((m, m))
    cells = np.zeros((m, m), dtype=np.int64)
    for i, j in itertools.combinations(range(m), 2):
        _, (ri, rj), k = bvft_pair(candidates[i], candidates[j], tuples, policy, eps, v_max)
        L[i, j], L[j, i] = ri, rj
        cells[i, j] = cells[j, i] = k
    off = L.copy()
    np.fill_diagonal(off, -np.inf)
    winner = int(np.argmin(off.max(axis=1)))
    return SelectionReport(winner, L, cells)
