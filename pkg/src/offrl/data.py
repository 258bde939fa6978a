"""Offline datasets: trajectory and transition-tuple sampling plus a text format.

Random streams are derived per block of ``BLOCK`` consecutive indices from
``SeedSequence(seed, spawn_key=(block,))``, so a dataset is a pure function
of its inputs no matter how the blocks are scheduled.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path
from typing import Iterator, Optional

import numpy as np

from .mdp import OccupancyMeasure, StationaryPolicy, TabularMDP

BLOCK = 4096
HEADER_PREFIX = "# offrl-dataset "


class DatasetFormatError(ValueError):
    pass


def block_rng(seed: int, block: int) -> np.random.Generator:
    return np.random.default_rng(np.random.SeedSequence(int(seed), spawn_key=(int(block),)))


def _categorical(rng: np.random.Generator, probs: np.ndarray) -> np.ndarray:
    """One draw per row of ``probs``."""
    cdf = np.cumsum(probs, axis=-1)
    u = rng.random(probs.shape[0])
    idx = (cdf <= u[:, None]).sum(axis=1)
    return np.minimum(idx, probs.shape[1] - 1)


def _rewards(rng: np.random.Generator, mdp: TabularMDP, s: np.ndarray, a: np.ndarray) -> np.ndarray:
    if mdp.reward_noise is None:
        return mdp.reward[s, a]
    k = _categorical(rng, mdp.reward_noise.probs[s, a])
    return mdp.reward_noise.values[s, a, k]


@dataclass(frozen=True)
class Trajectory:
    steps: tuple  # ((s, a, r, s_next), ...)

    def __len__(self):
        return len(self.steps)


@dataclass(frozen=True, eq=False)
class TrajectoryDataset:
    """Padded arrays of shape (n, horizon); entries past ``lengths[i]`` are -1 / 0."""

    states: np.ndarray
    actions: np.ndarray
    rewards: np.ndarray
    next_states: np.ndarray
    lengths: np.ndarray
    behavior: StationaryPolicy
    horizon: int
    seed: int
    gamma: float
    r_max: float = 1.0

    def __len__(self) -> int:
        return len(self.lengths)

    @property
    def n_states(self) -> int:
        return self.behavior.probs.shape[0]

    @property
    def n_actions(self) -> int:
        return self.behavior.probs.shape[1]

    def trajectory(self, i: int) -> Trajectory:
        L = int(self.lengths[i])
        return Trajectory(
            tuple(
                (int(self.states[i, t]), int(self.actions[i, t]), float(self.rewards[i, t]), int(self.next_states[i, t]))
                for t in range(L)
            )
        )

    @property
    def trajectories(self) -> list:
        return [self.trajectory(i) for i in range(len(self))]

    def mask(self) -> np.ndarray:
        return np.arange(self.horizon)[None, :] < self.lengths[:, None]

    def __eq__(self, other):
        if not isinstance(other, TrajectoryDataset):
            return NotImplemented
        return (
            self.horizon == other.horizon
            and self.seed == other.seed
            and self.gamma == other.gamma
            and self.r_max == other.r_max
            and np.array_equal(self.behavior.probs, other.behavior.probs)
            and all(
                np.array_equal(getattr(self, k), getattr(other, k))
                for k in ("states", "actions", "rewards", "next_states", "lengths")
            )
        )


@dataclass(frozen=True, eq=False)
class TupleDataset:
    states: np.ndarray
    actions: np.ndarray
    rewards: np.ndarray
    next_states: np.ndarray
    n_states: int
    n_actions: int
    gamma: float
    r_max: float = 1.0
    data_dist: Optional[OccupancyMeasure] = None
    seed: Optional[int] = None

    def __post_init__(self):
        for k in ("states", "actions", "next_states"):
            object.__setattr__(self, k, np.asarray(getattr(self, k), dtype=np.int64))
        object.__setattr__(self, "rewards", np.asarray(self.rewards, dtype=float))
        n = len(self.states)
        if not (len(self.actions) == len(self.rewards) == len(self.next_states) == n):
            raise ValueError("tuple fields must have equal length")
        if n and (
            self.states.min() < 0
            or self.states.max() >= self.n_states
            or self.next_states.min() < 0
            or self.next_states.max() >= self.n_states
            or self.actions.min() < 0
            or self.actions.max() >= self.n_actions
        ):
            raise ValueError("state or action out of range")

    def __len__(self) -> int:
        return len(self.states)

    @property
    def v_max(self) -> float:
        return self.r_max / (1.0 - self.gamma)

    def __iter__(self) -> Iterator[tuple]:
        for s, a, r, s2 in zip(self.states, self.actions, self.rewards, self.next_states):
            yield int(s), int(a), float(r), int(s2)

    def pair_counts(self) -> np.ndarray:
        c = np.zeros(self.n_states * self.n_actions)
        np.add.at(c, self.states * self.n_actions + self.actions, 1.0)
        return c.reshape(self.n_states, self.n_actions)

    def empirical_dist(self) -> np.ndarray:
        return self.pair_counts() / max(len(self), 1)

    def __eq__(self, other):
        if not isinstance(other, TupleDataset):
            return NotImplemented
        dd = lambda d: None if d is None else d.dist  # noqa: E731
        a, b = dd(self.data_dist), dd(other.data_dist)
        return (
            (self.n_states, self.n_actions, self.gamma, self.r_max, self.seed)
            == (other.n_states, other.n_actions, other.gamma, other.r_max, other.seed)
            and ((a is None and b is None) or (a is not None and b is not None and np.array_equal(a, b)))
            and all(
                np.array_equal(getattr(self, k), getattr(other, k))
                for k in ("states", "actions", "rewards", "next_states")
            )
        )


def sample_trajectories(mdp: TabularMDP, behavior: StationaryPolicy, n: int, H: int, seed: int) -> TrajectoryDataset:
    if n < 1 or H < 1:
        raise ValueError("n and H must be >= 1")
    S = np.full((n, H), -1, dtype=np.int64)
    Aa = np.full((n, H), -1, dtype=np.int64)
    Rr = np.zeros((n, H))
    S2 = np.full((n, H), -1, dtype=np.int64)
    L = np.zeros(n, dtype=np.int64)
    for b, start in enumerate(range(0, n, BLOCK)):
        stop = min(start + BLOCK, n)
        m = stop - start
        rng = block_rng(seed, b)
        s = _categorical(rng, np.broadcast_to(mdp.init_dist, (m, mdp.n_states)))
        alive = np.ones(m, dtype=bool) if mdp.absorbing is None else s != mdp.absorbing
        for t in range(H):
            a = _categorical(rng, behavior.probs[s])
            r = _rewards(rng, mdp, s, a)
            s2 = _categorical(rng, mdp.transition[s, a])
            rows = np.nonzero(alive)[0] + start
            S[rows, t], Aa[rows, t], Rr[rows, t], S2[rows, t] = s[alive], a[alive], r[alive], s2[alive]
            L[start:stop] += alive
            if mdp.absorbing is not None:
                alive &= s2 != mdp.absorbing
            s = s2
    return TrajectoryDataset(S, Aa, Rr, S2, L, behavior, H, seed, mdp.gamma, mdp.r_max)


def sample_tuples(mdp: TabularMDP, d_D, n: int, seed: int) -> TupleDataset:
    """i.i.d. tuples with (s, a) ~ d_D, r ~ R(s, a), s' ~ P(.|s, a)."""
    occ = d_D if isinstance(d_D, OccupancyMeasure) else OccupancyMeasure(d_D)
    flat = occ.dist.reshape(-1)
    s_all = np.empty(n, dtype=np.int64)
    a_all = np.empty(n, dtype=np.int64)
    r_all = np.empty(n)
    s2_all = np.empty(n, dtype=np.int64)
    for b, start in enumerate(range(0, n, BLOCK)):
        stop = min(start + BLOCK, n)
        rng = block_rng(seed, b)
        sa = _categorical(rng, np.broadcast_to(flat, (stop - start, flat.size)))
        s, a = np.divmod(sa, mdp.n_actions)
        s_all[start:stop], a_all[start:stop] = s, a
        r_all[start:stop] = _rewards(rng, mdp, s, a)
        s2_all[start:stop] = _categorical(rng, mdp.transition[s, a])
    return TupleDataset(s_all, a_all, r_all, s2_all, mdp.n_states, mdp.n_actions, mdp.gamma, mdp.r_max, occ, seed)


def tuples_from_trajectories(td: TrajectoryDataset) -> TupleDataset:
    """All steps in trajectory-major, step-minor order; ``data_dist`` stays unset."""
    m = td.mask()
    return TupleDataset(
        td.states[m],
        td.actions[m],
        td.rewards[m],
        td.next_states[m],
        td.n_states,
        td.n_actions,
        td.gamma,
        td.r_max,
        None,
        td.seed,
    )


# ---------------------------------------------------------------------------
# text format


def _fmt(x: float) -> str:
    return repr(float(x))


def save_dataset(ds, path) -> None:
    path = Path(path)
    lines = []
    if isinstance(ds, TupleDataset):
        header = {
            "kind": "tuples",
            "seed": ds.seed,
            "count": len(ds),
            "n_states": ds.n_states,
            "n_actions": ds.n_actions,
            "gamma": ds.gamma,
            "r_max": ds.r_max,
            "data_dist": None if ds.data_dist is None else ds.data_dist.dist.tolist(),
        }
        for s, a, r, s2 in ds:
            lines.append(f"{s} {a} {_fmt(r)} {s2}")
    elif isinstance(ds, TrajectoryDataset):
        header = {
            "kind": "trajectories",
            "seed": ds.seed,
            "count": len(ds),
            "horizon": ds.horizon,
            "gamma": ds.gamma,
            "r_max": ds.r_max,
            "behavior": ds.behavior.probs.tolist(),
        }
        for i in range(len(ds)):
            steps = ds.trajectory(i).steps
            lines.append(";".join(f"{s},{a},{_fmt(r)},{s2}" for s, a, r, s2 in steps) if steps else "-")
    else:
        raise TypeError(f"cannot save {type(ds).__name__}")
    with open(path, "w") as fh:
        fh.write(HEADER_PREFIX + json.dumps(header) + "\n")
        for line in lines:
            fh.write(line + "\n")


def load_dataset(path):
    with open(path) as fh:
        raw = fh.read().split("\n")
    if raw and raw[-1] == "":
        raw.pop()
    if not raw or not raw[0].startswith(HEADER_PREFIX):
        raise DatasetFormatError("line 1: missing dataset header")
    try:
        header = json.loads(raw[0][len(HEADER_PREFIX):])
    except json.JSONDecodeError as exc:
        raise DatasetFormatError(f"line 1: bad header ({exc})") from None
    body = raw[1:]
    if len(body) != header["count"]:
        raise DatasetFormatError(f"line {len(raw) + 1}: expected {header['count']} records, found {len(body)}")
    if header["kind"] == "tuples":
        return _load_tuples(header, body)
    if header["kind"] == "trajectories":
        return _load_trajectories(header, body)
    raise DatasetFormatError(f"line 1: unknown dataset kind {header['kind']!r}")


def _parse_step(fields: list, lineno: int) -> tuple:
    if len(fields) != 4:
        raise DatasetFormatError(f"line {lineno}: expected 4 fields, found {len(fields)}")
    try:
        return int(fields[0]), int(fields[1]), float(fields[2]), int(fields[3])
    except ValueError as exc:
        raise DatasetFormatError(f"line {lineno}: {exc}") from None


def _load_tuples(header: dict, body: list) -> TupleDataset:
    rows = [_parse_step(line.split(), i + 2) for i, line in enumerate(body)]
    arr = list(zip(*rows)) if rows else [[], [], [], []]
    dd = header.get("data_dist")
    return TupleDataset(
        np.array(arr[0], dtype=np.int64),
        np.array(arr[1], dtype=np.int64),
        np.array(arr[2], dtype=float),
        np.array(arr[3], dtype=np.int64),
        header["n_states"],
        header["n_actions"],
        header["gamma"],
        header["r_max"],
        None if dd is None else OccupancyMeasure(np.array(dd)),
        header["seed"],
    )


def _load_trajectories(header: dict, body: list) -> TrajectoryDataset:
    H = header["horizon"]
    n = len(body)
    S = np.full((n, H), -1, dtype=np.int64)
    A = np.full((n, H), -1, dtype=np.int64)
    R = np.zeros((n, H))
    S2 = np.full((n, H), -1, dtype=np.int64)
    L = np.zeros(n, dtype=np.int64)
    for i, line in enumerate(body):
        lineno = i + 2
        if line == "-":
            continue
        steps = [_parse_step(chunk.split(","), lineno) for chunk in line.split(";")]
        if len(steps) > H:
            raise DatasetFormatError(f"line {lineno}: trajectory longer than horizon {H}")
        for t, (s, a, r, s2) in enumerate(steps):
            S[i, t], A[i, t], R[i, t], S2[i, t] = s, a, r, s2
        L[i] = len(steps)
    behavior = StationaryPolicy(np.array(header["behavior"]))
    return TrajectoryDataset(S, A, R, S2, L, behavior, H, header["seed"], header["gamma"], header["r_max"])


def dataset_io(dataset, path, direction: str = "save"):
    """``direction='save'`` writes ``dataset`` to ``path``; ``'load'`` reads and returns one."""
    if direction == "save":
        save_dataset(dataset, path)
        return None
    if direction == "load":
        return load_dataset(path)
    raise ValueError("direction must be 'save' or 'load'")
