import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from offrl.data import (
    BLOCK,
    DatasetFormatError,
    TupleDataset,
    load_dataset,
    sample_trajectories,
    sample_tuples,
    save_dataset,
    tuples_from_trajectories,
)
from offrl.mdp import OccupancyMeasure, StationaryPolicy, TabularMDP, random_mdp, random_policy


def deterministic_chain():
    P = np.zeros((3, 2, 3))
    for s in range(3):
        P[s, 0, (s + 1) % 3] = 1.0
        P[s, 1, s] = 1.0
    return TabularMDP(P, np.array([[0.1, 0.2], [0.3, 0.4], [0.5, 0.6]]), 0.9, np.array([1.0, 0, 0]))


class TestTrajectories:
    def test_deterministic_all_identical(self):
        td = sample_trajectories(deterministic_chain(), StationaryPolicy.deterministic([0, 1, 0], 2), 20, 6, seed=1)
        assert all(td.trajectory(i) == td.trajectory(0) for i in range(20))

    def test_action_frequency_per_step(self, loop_mdp):
        n = 10**5
        td = sample_trajectories(loop_mdp, StationaryPolicy.uniform(1, 2), n, 5, seed=3)
        freq = (td.actions == 0).mean(axis=0)
        assert np.all(np.abs(freq - 0.5) <= 3 * np.sqrt(0.25 / n))

    def test_same_seed_identical(self, small_mdp, small_policy):
        a = sample_trajectories(small_mdp, small_policy, 50, 7, seed=11)
        b = sample_trajectories(small_mdp, small_policy, 50, 7, seed=11)
        assert a == b
        assert a != sample_trajectories(small_mdp, small_policy, 50, 7, seed=12)

    def test_chaining_and_support(self, small_mdp, small_policy):
        td = sample_trajectories(small_mdp, small_policy, 200, 8, seed=2)
        for traj in td.trajectories:
            assert len(traj) <= 8
            for (_, _, _, s2), (s, a, _, _) in zip(traj.steps, traj.steps[1:]):
                assert s2 == s
            assert all(small_policy.probs[s, a] > 0 for s, a, _, _ in traj.steps)

    def test_absorbing_state_stops(self):
        P = np.zeros((2, 1, 2))
        P[0, 0, 1] = P[1, 0, 1] = 1.0
        mdp = TabularMDP(P, np.array([[1.0], [0.0]]), 0.9, np.array([1.0, 0.0]), absorbing=1)
        td = sample_trajectories(mdp, StationaryPolicy.uniform(2, 1), 5, 10, seed=0)
        assert np.all(td.lengths == 1)

    def test_block_prefix_stable(self, small_mdp, small_policy):
        # a full block is drawn from its own stream, so it does not depend on later blocks
        a = sample_trajectories(small_mdp, small_policy, BLOCK, 3, seed=5)
        b = sample_trajectories(small_mdp, small_policy, BLOCK + 10, 3, seed=5)
        assert np.array_equal(a.states, b.states[:BLOCK])


class TestTuples:
    def test_point_mass(self, small_mdp):
        d = np.zeros((3, 2))
        d[1, 0] = 1.0
        ds = sample_tuples(small_mdp, d, 100, seed=0)
        assert np.all(ds.states == 1) and np.all(ds.actions == 0)

    def test_frequencies_tv(self):
        mdp = random_mdp(3, 2, 0.9, np.random.default_rng(0))
        d = np.random.default_rng(1).dirichlet(np.ones(6)).reshape(3, 2)
        n = 10**5
        ds = sample_tuples(mdp, OccupancyMeasure(d), n, seed=4)
        tv = 0.5 * np.abs(ds.empirical_dist() - d).sum()
        assert tv <= 2 * np.sqrt(6 / n)

    def test_deterministic_transitions_consistent(self):
        mdp = deterministic_chain()
        ds = sample_tuples(mdp, np.full((3, 2), 1 / 6), 500, seed=3)
        assert np.all(mdp.transition[ds.states, ds.actions, ds.next_states] == 1.0)

    @given(st.integers(0, 10**6))
    @settings(max_examples=15)
    def test_rewards_and_ranges(self, seed):
        mdp = random_mdp(4, 3, 0.8, np.random.default_rng(seed))
        ds = sample_tuples(mdp, np.full((4, 3), 1 / 12), 64, seed=seed)
        assert ds.rewards.min() >= 0 and ds.rewards.max() <= mdp.r_max
        assert ds.states.max() < 4 and ds.actions.max() < 3 and ds.next_states.max() < 4

    def test_rejects_out_of_range(self):
        with pytest.raises(ValueError):
            TupleDataset(np.array([3]), np.array([0]), np.array([0.0]), np.array([0]), 3, 2, 0.9)


class TestFlatten:
    def test_single_trajectory_in_order(self, small_mdp, small_policy):
        td = sample_trajectories(small_mdp, small_policy, 1, 3, seed=0)
        tu = tuples_from_trajectories(td)
        assert list(tu) == list(td.trajectory(0).steps)

    def test_count(self, loop_mdp):
        td = sample_trajectories(loop_mdp, StationaryPolicy.uniform(1, 2), 30, 4, seed=0)
        assert len(tuples_from_trajectories(td)) == 120

    def test_membership(self, small_mdp, small_policy):
        td = sample_trajectories(small_mdp, small_policy, 40, 5, seed=9)
        pool = {step for traj in td.trajectories for step in traj.steps}
        assert all(step in pool for step in tuples_from_trajectories(td))


class TestIO:
    def test_empty_is_header_only(self, tmp_path, small_mdp):
        ds = sample_tuples(small_mdp, np.full((3, 2), 1 / 6), 0, seed=0)
        path = tmp_path / "e.txt"
        save_dataset(ds, path)
        assert len(path.read_text().splitlines()) == 1
        assert load_dataset(path) == ds

    def test_round_trip_tuples(self, tmp_path):
        mdp = random_mdp(4, 2, 0.9, np.random.default_rng(2))
        ds = sample_tuples(mdp, np.full((4, 2), 1 / 8), 300, seed=7)
        save_dataset(ds, tmp_path / "t.txt")
        assert load_dataset(tmp_path / "t.txt") == ds

    def test_round_trip_trajectories(self, tmp_path, small_mdp):
        td = sample_trajectories(small_mdp, random_policy(3, 2, np.random.default_rng(1)), 25, 6, seed=3)
        save_dataset(td, tmp_path / "j.txt")
        assert load_dataset(tmp_path / "j.txt") == td

    def test_bad_field_count_names_line(self, tmp_path, small_mdp):
        ds = sample_tuples(small_mdp, np.full((3, 2), 1 / 6), 5, seed=0)
        path = tmp_path / "bad.txt"
        save_dataset(ds, path)
        lines = path.read_text().splitlines()
        lines[3] = lines[3] + " 7"
        path.write_text("\n".join(lines) + "\n")
        with pytest.raises(DatasetFormatError, match="line 4"):
            load_dataset(path)
