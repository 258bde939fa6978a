import warnings

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from offrl.data import sample_tuples
from offrl.mdp import solve_q
from offrl.scenarios import random_scenario
from offrl.selection import bvft_pair, bvft_tournament, cell_bound, population_residual


def setup(seed, n=10_000):
    sc = random_scenario(seed=1000 + seed)
    pi = sc.targets["pi"]
    v = sc.mdp.v_max
    tuples = sample_tuples(sc.mdp, sc.data_dist(), n, seed)
    return sc, pi, v, solve_q(sc.mdp, pi), tuples


class TestPair:
    def test_identical_candidates_tie_to_first(self):
        for s in range(10):
            sc, pi, v, q, tu = setup(s)
            eps = v / 20
            chosen, res, _ = bvft_pair(q, q, tu, pi, eps, v)
            assert chosen == 0 and res[0] == res[1]
            assert res[0] <= eps / (1 - sc.mdp.gamma) + v / np.sqrt(len(tu))

    def test_true_function_beats_shifted(self):
        picks = 0
        for s in range(100):
            _, pi, v, q, tu = setup(s)
            with warnings.catch_warnings():
                warnings.simplefilter("ignore")
                chosen, _, _ = bvft_pair(q, np.clip(q + 0.5 * v, 0, v), tu, pi, v / 20, v)
            picks += chosen == 0
        assert picks >= 95

    def test_empirical_residual_tracks_population(self):
        for s in range(20):
            sc, pi, v, q, tu = setup(s)
            other = np.clip(q + 0.5 * v, 0, v)
            _, (r, _), _ = bvft_pair(q, other, tu, pi, v / 20, v)
            pop = population_residual(q, other, sc.mdp, pi, sc.data_dist().dist, v / 20, v)
            assert abs(r - pop) <= v / np.sqrt(len(tu))

    def test_out_of_range_clipped_with_warning(self):
        _, pi, v, q, tu = setup(0, n=200)
        with pytest.warns(UserWarning, match="clipped"):
            bvft_pair(q, q + 2 * v, tu, pi, v / 10, v)

    @given(st.integers(0, 10**6), st.sampled_from([0.05, 0.1, 0.25]))
    @settings(max_examples=20)
    def test_cell_count_bound(self, seed, frac):
        sc = random_scenario(seed=seed % 1000)
        v = sc.mdp.v_max
        rng = np.random.default_rng(seed)
        f1, f2 = rng.uniform(0, v, size=(2, 4, 2))
        tu = sample_tuples(sc.mdp, sc.data_dist(), 50, seed)
        _, _, k = bvft_pair(f1, f2, tu, sc.targets["pi"], frac * v, v)
        assert k <= cell_bound(frac * v, v)


class TestTournament:
    def test_two_candidates_agree_with_pair(self):
        for s in range(10):
            sc, pi, v, _, tu = setup(s, n=1000)
            a, b = sc.classes["candidates"][:2]
            chosen, res, k = bvft_pair(a, b, tu, pi, v / 20, v)
            rep = bvft_tournament([a, b], tu, pi, v / 20, v)
            assert rep.winner_index == chosen
            assert rep.pairwise_losses[0, 1] == res[0] and rep.pairwise_losses[1, 0] == res[1]
            assert rep.partitions_used[0, 1] == k

    def test_planted_truth_recovered(self):
        wins = 0
        for s in range(100):
            sc, pi, v, _, tu = setup(s)
            wins += bvft_tournament(sc.classes["candidates"], tu, pi, v / 20, v).winner_index == 0
        assert wins >= 90

    def test_identical_candidates(self):
        _, pi, v, q, tu = setup(3, n=1000)
        rep = bvft_tournament([q] * 4, tu, pi, v / 20, v)
        off = rep.pairwise_losses[~np.eye(4, dtype=bool)]
        assert rep.winner_index == 0
        assert np.ptp(off) <= 1e-9

    def test_recovery_monotone_in_n(self):
        kept = 0
        for s in range(50):
            sc, pi, v, _, big = setup(s, n=10_000)
            small = sample_tuples(sc.mdp, sc.data_dist(), 1000, s)
            hit = [bvft_tournament(sc.classes["candidates"], tu, pi, v / 20, v).winner_index == 0 for tu in (small, big)]
            kept += hit[1] >= hit[0]
        assert kept >= 40

    def test_needs_two(self):
        _, pi, v, q, tu = setup(0, n=100)
        with pytest.raises(ValueError):
            bvft_tournament([q], tu, pi, v / 20, v)
