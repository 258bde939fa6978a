import json
from pathlib import Path

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

import oracles
from offrl.classes import (
    FeatureMap,
    FiniteClass,
    LinearClass,
    Partition,
    PiecewiseConstantClass,
    SingularGramError,
    aggregate_mdp,
    bvft_partition,
    check_completeness,
    discretize,
    fit_least_squares,
    gen_low_rank_mdp,
    project,
)
from offrl.data import TupleDataset, sample_tuples
from offrl.mdp import random_mdp, random_policy
from offrl.scenarios import divergence

FROZEN = json.loads((Path(__file__).parent / "frozen_values.json").read_text())


def tuples_on(states, actions, S, A, targets=None):
    n = len(states)
    r = np.zeros(n) if targets is None else targets
    return TupleDataset(np.asarray(states), np.asarray(actions), np.clip(r, 0, 1), np.zeros(n, int), S, A, 0.9)


class TestFit:
    def test_member_targets_recovered(self):
        rng = np.random.default_rng(0)
        members = rng.uniform(size=(4, 3, 2))
        cls = FiniteClass(members)
        s, a = rng.integers(0, 3, 50), rng.integers(0, 2, 50)
        out = fit_least_squares(cls, tuples_on(s, a, 3, 2), members[2][s, a])
        assert np.abs(out[s, a] - members[2][s, a]).max() <= 1e-10

    def test_linear_member_recovered(self):
        rng = np.random.default_rng(1)
        phi = FeatureMap(rng.normal(size=(3, 2, 3)))
        theta = rng.normal(size=3)
        s, a = rng.integers(0, 3, 60), rng.integers(0, 2, 60)
        out = LinearClass(phi).fit(tuples_on(s, a, 3, 2), phi.features[s, a] @ theta)
        assert np.abs(out - phi.features @ theta).max() <= 1e-10

    def test_piecewise_mean(self):
        cls = PiecewiseConstantClass(Partition(np.zeros((1, 2), int), 1))
        out = cls.fit(tuples_on([0, 0], [0, 1], 1, 2), np.array([1.0, 3.0]))
        assert np.allclose(out, 2.0)

    def test_pseudo_inverse_oracle(self):
        phi, s, a, y, _ = oracles.pinv_fit()
        theta = LinearClass(FeatureMap(phi)).fit_coef(tuples_on(s, a, 5, 2), y, ridge=1e-8)
        assert np.abs(theta - np.array(FROZEN["pinv_coef"])).max() <= 1e-6

    def test_singular_gram_without_ridge(self):
        phi = FeatureMap(np.ones((2, 1, 2)))
        with pytest.raises(SingularGramError):
            LinearClass(phi).fit(tuples_on([0, 1], [0, 0], 2, 1), np.array([0.1, 0.2]))

    def test_norm_bound_enforced(self):
        with pytest.raises(ValueError):
            FeatureMap(np.full((1, 1, 2), 3.0), norm_bound=1.0)


class TestProject:
    def test_idempotent_linear(self):
        rng = np.random.default_rng(2)
        cls = LinearClass(FeatureMap(rng.normal(size=(4, 2, 3))))
        f = cls.values(rng.normal(size=3))
        w = rng.dirichlet(np.ones(8)).reshape(4, 2)
        assert np.abs(project(cls, f, w) - f).max() <= 1e-10

    def test_idempotent_finite(self):
        members = np.random.default_rng(3).uniform(size=(5, 2, 2))
        assert np.array_equal(project(FiniteClass(members), members[3], np.full((2, 2), 0.25)), members[3])

    def test_piecewise_is_weighted_mean(self):
        part = Partition(np.array([[0, 0], [1, 1]]), 2)
        w = np.array([[0.1, 0.3], [0.2, 0.4]])
        f = np.array([[1.0, 2.0], [3.0, 5.0]])
        out = project(PiecewiseConstantClass(part), f, w)
        assert np.allclose(out[0], (0.1 * 1 + 0.3 * 2) / 0.4)
        assert np.allclose(out[1], (0.2 * 3 + 0.4 * 5) / 0.6)

    def test_zero_mass_cell_plain_mean(self):
        part = Partition(np.array([[0, 1]]), 2)
        out = project(PiecewiseConstantClass(part), np.array([[1.0, 4.0]]), np.array([[1.0, 0.0]]))
        assert np.allclose(out, [[1.0, 4.0]])

    def test_linear_non_expansion(self):
        rng = np.random.default_rng(4)
        cls = LinearClass(FeatureMap(rng.normal(size=(4, 3, 3))))
        w = rng.dirichlet(np.ones(12)).reshape(4, 3)
        for _ in range(100):
            f, g = rng.normal(size=(2, 4, 3))
            lhs = np.sqrt((w * (project(cls, f, w) - project(cls, g, w)) ** 2).sum())
            assert lhs <= np.sqrt((w * (f - g) ** 2).sum()) + 1e-10

    @given(st.integers(0, 10**6))
    def test_piecewise_sup_non_expansion(self, seed):
        rng = np.random.default_rng(seed)
        part = Partition.from_labels(rng.integers(0, 3, size=(3, 2)))
        cls = PiecewiseConstantClass(part)
        w = rng.dirichlet(np.ones(6)).reshape(3, 2)
        f, g = rng.normal(size=(2, 3, 2))
        lhs = np.abs(cls.project(f, w) - cls.project(g, w)).max()
        assert lhs <= np.abs(f - g).max() + 1e-12


class TestCompleteness:
    def test_tabular_full_class(self, small_mdp, small_policy):
        tab = LinearClass(FeatureMap.tabular(3, 2))
        rep = check_completeness(tab, tab, small_mdp, small_policy)
        assert rep.gap <= 1e-10 and rep.complete

    def test_divergence_class_not_complete(self):
        sc = divergence(0.95)
        lin = sc.classes["linear"]
        pi = sc.targets["pi"]
        assert check_completeness(lin, lin, sc.mdp, pi).gap > 0
        thetas = np.linspace(-1, 1, 21)
        sweep = FiniteClass(np.stack([lin.values(np.array([t])) for t in thetas]))
        per = check_completeness(sweep, lin, sc.mdp, pi).per_member
        zero = np.isclose(thetas, 0.0)
        assert np.all(per[zero] <= 1e-12) and np.all(per[~zero] > 0)

    def test_low_rank_linear_complete(self):
        mdp, phi, *_ = gen_low_rank_mdp(2, 6, 2, seed=3)
        lin = LinearClass(phi)
        for k in range(5):
            pi = random_policy(6, 2, np.random.default_rng(k))
            rep = check_completeness(lin, lin, mdp, pi)
            assert rep.gap <= 1e-8 and rep.realization_gap <= 1e-8


class TestLowRank:
    def test_rank_one_shares_rows(self):
        mdp, *_ = gen_low_rank_mdp(1, 4, 3, seed=0)
        rows = mdp.transition.reshape(-1, 4)
        assert np.abs(rows - rows[0]).max() <= 1e-12

    @pytest.mark.parametrize("d", [1, 2, 3])
    def test_reconstruction_and_rank(self, d):
        mdp, phi, psi, theta = gen_low_rank_mdp(d, 7, 3, seed=d)
        assert np.abs(mdp.transition - phi.features @ psi.T).max() <= 1e-12
        sv = np.linalg.svd(mdp.transition.reshape(21, 7), compute_uv=False)
        assert int((sv > 1e-10 * sv[0]).sum()) == d

    def test_too_large_rank(self):
        with pytest.raises(ValueError):
            gen_low_rank_mdp(7, 3, 2, seed=0)


class TestBVFT:
    def test_constant_pair_one_cell(self):
        f = np.full((3, 2), 0.37)
        assert bvft_partition(f, f, 0.1, 1.0).n_cells == 1

    def test_hand_discretization(self):
        f1 = np.array([[0.1], [0.9]])
        f2 = np.array([[0.1], [0.1]])
        assert bvft_partition(f1, f2, 0.5, 1.0).n_cells == FROZEN["bvft_hand_cells"]

    def test_rejects_out_of_range(self):
        with pytest.raises(ValueError):
            bvft_partition(np.array([[2.0]]), np.array([[0.0]]), 0.5, 1.0)

    @given(st.integers(0, 10**6), st.sampled_from([0.05, 0.1, 0.25]))
    @settings(max_examples=25)
    def test_refines_and_approximates(self, seed, eps):
        rng = np.random.default_rng(seed)
        f1, f2 = rng.uniform(0, 2.0, size=(2, 4, 3))
        part = bvft_partition(f1, f2, eps, 2.0)
        for f in (f1, f2):
            single = bvft_partition(f, f, eps, 2.0)
            # every joint cell sits inside one single-function cell
            for c in range(part.n_cells):
                assert len(set(single.cell_of[part.cell_of == c])) == 1
            pc = PiecewiseConstantClass(part).values(
                np.array([discretize(f, eps, 2.0)[part.cell_of == c][0] for c in range(part.n_cells)])
            )
            assert np.abs(pc - f).max() <= eps + 1e-12


class TestAggregation:
    def test_identity_partition(self, small_mdp):
        agg = aggregate_mdp(small_mdp, Partition.identity(3, 2), np.full((3, 2), 1 / 6))
        assert np.abs(agg.transition_agg - small_mdp.transition).max() <= 1e-15
        assert np.abs(agg.reward_agg - small_mdp.reward).max() <= 1e-15

    @given(st.integers(0, 10**6))
    @settings(max_examples=20)
    def test_invariants(self, seed):
        rng = np.random.default_rng(seed)
        mdp = random_mdp(4, 2, 0.9, rng)
        part = Partition.from_labels(rng.integers(0, 3, size=(4, 2)))
        d = rng.dirichlet(np.ones(8)).reshape(4, 2)
        d[0, 0] = 0.0
        d /= d.sum()
        agg = aggregate_mdp(mdp, part, d)
        sums = np.bincount(part.cell_of.reshape(-1), weights=agg.weights.reshape(-1))
        assert np.allclose(sums, 1.0)
        assert np.allclose(agg.transition_agg.sum(-1), 1.0)
        assert agg.mdp.n_states == 4

    def test_partition_contiguity(self):
        with pytest.raises(ValueError):
            Partition(np.array([[0, 2]]), 2)
        p = Partition.from_labels(np.array([[7, 3], [7, 9]]))
        assert p.n_cells == 3 and set(p.cell_of.reshape(-1)) == {0, 1, 2}


def test_sampled_data_fit_matches_counts(small_mdp):
    ds = sample_tuples(small_mdp, np.full((3, 2), 1 / 6), 400, seed=1)
    tab = LinearClass(FeatureMap.tabular(3, 2))
    out = tab.fit(ds, ds.rewards)
    cnt = ds.pair_counts()
    tot = np.zeros((3, 2))
    np.add.at(tot, (ds.states, ds.actions), ds.rewards)
    assert np.allclose(out, tot / cnt, atol=1e-10)
