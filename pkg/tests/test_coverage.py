import json
import math
from pathlib import Path

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from offrl.classes import FeatureMap, FiniteClass, LinearClass, gen_low_rank_mdp
from offrl.coverage import (
    barycentric_spanner,
    c_avg,
    c_inf,
    c_sq,
    chi_sq_coverage,
    coverage_report,
    effective_weight,
    linear_avg_bound,
    simplex_grid,
    spanner_design,
)
from offrl.mdp import (
    OccupancyMeasure,
    enumerate_deterministic,
    occupancy,
    random_mdp,
    random_policy,
    solve_q,
)
from offrl.scenarios import tree, tree_minimax_coverage

FROZEN = json.loads((Path(__file__).parent / "frozen_values.json").read_text())


def finite_instance(seed, m=4):
    rng = np.random.default_rng(seed)
    mdp = random_mdp(3, 2, 0.9, rng)
    pi = random_policy(3, 2, rng)
    q = solve_q(mdp, pi)
    members = np.stack([q] + [q + rng.normal(scale=1.0, size=q.shape) for _ in range(m - 1)])
    d_D = rng.dirichlet(np.ones(6)).reshape(3, 2)
    return mdp, pi, FiniteClass(members), d_D


class TestCInf:
    def test_identical(self):
        d = np.random.default_rng(0).dirichlet(np.ones(6)).reshape(3, 2)
        assert c_inf(d, d) == pytest.approx(1.0)

    def test_missing_support(self):
        assert c_inf(np.array([[0.5, 0.5]]), np.array([[1.0, 0.0]])) == math.inf

    def test_exhaustive_scan(self):
        rng = np.random.default_rng(1)
        for _ in range(20):
            p, q = rng.dirichlet(np.ones(6), size=2)
            best = 0.0
            for i in range(6):
                best = max(best, p[i] / q[i])
            assert c_inf(p.reshape(3, 2), OccupancyMeasure(q.reshape(3, 2))) == best


class TestCSq:
    def test_true_function_only(self, small_mdp, small_policy):
        cls = FiniteClass(solve_q(small_mdp, small_policy)[None])
        assert c_sq(cls, small_mdp, small_policy, np.full((3, 2), 1 / 6)) == 0.0

    def test_on_policy_data(self):
        mdp, pi, cls, _ = finite_instance(3)
        assert c_sq(cls, mdp, pi, occupancy(mdp, pi)) <= 1 + 1e-9

    def test_bounded_by_c_inf(self):
        for seed in range(100):
            mdp, pi, cls, d_D = finite_instance(seed)
            assert c_sq(cls, mdp, pi, d_D) <= c_inf(occupancy(mdp, pi), d_D) * (1 + 1e-9)


class TestCAvg:
    def test_true_function_only(self, small_mdp, small_policy):
        cls = FiniteClass(solve_q(small_mdp, small_policy)[None])
        assert c_avg(cls, small_mdp, small_policy, np.full((3, 2), 1 / 6)) == 0.0

    def test_below_c_sq(self):
        for seed in range(100):
            mdp, pi, cls, d_D = finite_instance(1000 + seed)
            assert c_avg(cls, mdp, pi, d_D) <= c_sq(cls, mdp, pi, d_D) + 1e-9

    def test_linear_quadratic_form(self):
        rng = np.random.default_rng(5)
        mdp = random_mdp(4, 2, 0.9, rng)
        pi = random_policy(4, 2, rng)
        phi = FeatureMap(rng.normal(size=(4, 2, 3)))
        d_D = rng.dirichlet(np.ones(8)).reshape(4, 2)
        d_pi = occupancy(mdp, pi).dist
        X = phi.flat
        Sigma = X.T @ (d_D.reshape(-1)[:, None] * X)
        m = X.T @ d_pi.reshape(-1)
        x = np.linalg.lstsq(Sigma, m, rcond=None)[0]
        assert c_avg(LinearClass(phi), mdp, pi, d_D) == pytest.approx(m @ x, rel=1e-9)
        assert linear_avg_bound(phi, d_pi, d_D) == pytest.approx(m @ x, rel=1e-9)


class TestChiSq:
    def test_identical(self):
        d = np.random.default_rng(2).dirichlet(np.ones(4)).reshape(2, 2)
        assert chi_sq_coverage(d, d) == pytest.approx(1.0)

    def test_two_point(self):
        assert chi_sq_coverage(np.array([[1.0, 0.0]]), np.array([[0.5, 0.5]])) == FROZEN["chi_sq_two_point"]


class TestEffectiveWeight:
    def test_tabular_is_density_ratio(self, small_mdp, small_policy):
        d_D = np.random.default_rng(3).dirichlet(np.ones(6)).reshape(3, 2)
        w = effective_weight(FeatureMap.tabular(3, 2), small_mdp, small_policy, d_D)
        assert np.allclose(w, occupancy(small_mdp, small_policy).dist / d_D, rtol=1e-9)

    @pytest.mark.parametrize("seed", range(5))
    def test_mean_matching(self, seed):
        mdp, phi, *_ = gen_low_rank_mdp(2, 6, 2, seed=seed)
        pi = random_policy(6, 2, np.random.default_rng(seed))
        d_D = np.random.default_rng(seed + 50).dirichlet(np.ones(12)).reshape(6, 2)
        w = effective_weight(phi, mdp, pi, d_D)
        lhs = np.einsum("sa,sad->d", d_D * w, phi.features)
        assert np.abs(lhs - phi.mean(occupancy(mdp, pi))).max() <= 1e-8


class TestProperties:
    @given(st.integers(0, 10**6))
    @settings(max_examples=30)
    def test_ordering_chain(self, seed):
        mdp, pi, cls, d_D = finite_instance(seed)
        rep = coverage_report(mdp, pi, d_D, cls)
        assert rep.c_avg <= rep.c_sq + 1e-9
        assert rep.c_sq <= rep.c_inf * (1 + 1e-9)
        assert rep.chi_sq <= rep.c_inf * (1 + 1e-9)
        assert min(rep.c_avg, rep.c_sq, rep.chi_sq) >= 0 and rep.c_inf >= 1 - 1e-12

    @given(st.integers(0, 10**6))
    def test_change_of_measure(self, seed):
        rng = np.random.default_rng(seed)
        nu, mu = rng.dirichlet(np.ones(6), size=2)
        xi = rng.normal(size=6)
        assert (nu * xi**2).sum() <= c_inf(nu, mu) * (mu * xi**2).sum() + 1e-10


class TestDesigns:
    def test_simplex_grid(self):
        g = simplex_grid(3, 4)
        assert len(g) == math.comb(6, 2)
        assert np.allclose(g.sum(1), 1.0)

    def test_spanner_coefficients(self):
        rng = np.random.default_rng(4)
        X = rng.normal(size=(12, 3))
        idx = barycentric_spanner(X)
        coef = np.linalg.solve(X[idx].T, X.T)
        assert np.abs(coef).max() <= 1 + 1e-6

    def test_spanner_design_low_rank(self):
        mdp, *_ = gen_low_rank_mdp(2, 5, 2, seed=0)
        pols = enumerate_deterministic(5, 2)
        d_D = spanner_design(mdp, pols)
        worst = max(c_inf(occupancy(mdp, p), d_D) for p in pols)
        assert worst <= 2 * 2

    def test_tree_minimax(self):
        assert tree_minimax_coverage(tree(2, 3)) == FROZEN["tree_minimax_2_3"]
        assert tree_minimax_coverage(tree(2, 3)) >= 2**3


def test_report_linear_kind(small_mdp, small_policy):
    rep = coverage_report(small_mdp, small_policy, np.full((3, 2), 1 / 6), LinearClass(FeatureMap.tabular(3, 2)))
    assert rep.bound_kind == "upper_bound" and rep.sigma_min_D == pytest.approx(1 / 6)
