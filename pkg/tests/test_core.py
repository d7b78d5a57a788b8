"""Problem container, Lagrangian, index sets, and stationarity grading."""

import numpy as np
import pytest

from helpers_tiny import random_tiny_mpcc
from mpcckit.compgeo import project_onto_D
from mpcckit.core import (
    MultiplierSet,
    QuadraticMpcc,
    check_mpcc_licq,
    check_mpcc_ssoc,
    classify_stationarity,
    compute_index_sets,
    eval_lagrangian,
    load_instance,
    save_instance,
)
from mpcckit.oracle import finite_diff


def _pair_problem(Q=None, q=None):
    """n=2 with the single pair G = x1, H = x2."""
    return QuadraticMpcc.build(Q=Q, q=q, n=2,
                               A_G=[[1.0, 0.0]], b_G=[0.0],
                               A_H=[[0.0, 1.0]], b_H=[0.0],
                               coordinate_selection=True)


class TestProblemContainer:
    def test_rejects_asymmetric_Q(self):
        with pytest.raises(ValueError):
            QuadraticMpcc.build(Q=[[1.0, 2.0], [0.0, 1.0]], n=2)

    def test_build_infers_dimensions(self):
        p = _pair_problem()
        assert (p.n, p.r, p.s, p.t) == (2, 0, 0, 1)

    def test_arrays_are_read_only(self):
        p = _pair_problem()
        with pytest.raises(ValueError):
            p.Q[0, 0] = 1.0

    def test_coordinate_selection_validates_rows(self):
        with pytest.raises(ValueError):
            QuadraticMpcc.build(n=2, A_G=[[1.0, 1.0]], b_G=[0.0],
                                A_H=[[0.0, 1.0]], b_H=[0.0],
                                coordinate_selection=True)

    def test_f_grad_shares_value_and_gradient(self):
        rng = np.random.default_rng(0)
        p = random_tiny_mpcc(rng)
        x = rng.normal(size=p.n)
        value, grad = p.f_grad(x)
        assert value == p.f(x)
        np.testing.assert_array_equal(grad, p.grad_f(x))


class TestEvalLagrangian:
    def test_reduces_to_objective_with_zero_multipliers(self):
        p = QuadraticMpcc.build(Q=np.eye(2), q=np.zeros(2))
        value, grad, hess = eval_lagrangian(p, [1.0, 2.0],
                                            MultiplierSet.zeros(p))
        assert value == 2.5
        np.testing.assert_array_equal(grad, [1.0, 2.0])
        np.testing.assert_array_equal(hess, np.eye(2))

    def test_inequality_term(self):
        p = QuadraticMpcc.build(n=2, A_g=[[1.0, 0.0]], b_g=[-1.0])
        m = MultiplierSet(lam=np.array([3.0]), eta=np.zeros(0),
                          mu=np.zeros(0), nu=np.zeros(0))
        value, grad, _ = eval_lagrangian(p, [2.0, 0.0], m)
        assert value == 3.0
        np.testing.assert_array_equal(grad, [3.0, 0.0])

    def test_gradient_matches_finite_differences(self):
        rng = np.random.default_rng(1)
        for _ in range(10):
            p = random_tiny_mpcc(rng)
            m = MultiplierSet(lam=rng.normal(size=p.r),
                              eta=rng.normal(size=p.s),
                              mu=rng.normal(size=p.t),
                              nu=rng.normal(size=p.t))
            x = rng.normal(size=p.n)
            _, grad, _ = eval_lagrangian(p, x, m)
            num = finite_diff(lambda v: eval_lagrangian(p, v, m)[0], x)
            np.testing.assert_allclose(grad, num, rtol=1e-6, atol=1e-6)


class TestIndexSets:
    def test_biactive_origin(self):
        p = _pair_problem()
        sets = compute_index_sets(p, [0.0, 0.0], MultiplierSet.zeros(p),
                                  tol=1e-8)
        np.testing.assert_array_equal(sets.i_00, [0])
        assert sets.i_plus0.size == 0 and sets.i_0plus.size == 0

    def test_inactive_first_component(self):
        p = _pair_problem()
        sets = compute_index_sets(p, [1.0, 0.0], MultiplierSet.zeros(p))
        np.testing.assert_array_equal(sets.i_plus0, [0])
        assert sets.i_00.size == 0

    def test_refinement_by_multiplier_sign(self):
        p = _pair_problem()
        m = MultiplierSet(lam=np.zeros(0), eta=np.zeros(0),
                          mu=np.array([-1.0]), nu=np.array([0.0]))
        sets = compute_index_sets(p, [0.0, 0.0], m, tol=1e-8)
        np.testing.assert_array_equal(sets.i_00_pmR, [0])
        assert sets.i_00_Rpm.size == 0 and sets.i_00_00.size == 0

    def test_feasible_pairs_are_partitioned(self):
        rng = np.random.default_rng(2)
        for _ in range(20):
            p = random_tiny_mpcc(rng)
            x = project_onto_D(rng.normal(size=p.n), p.pair_partition())
            sets = compute_index_sets(p, x, MultiplierSet.zeros(p))
            merged = np.concatenate([sets.i_plus0, sets.i_0plus, sets.i_00])
            np.testing.assert_array_equal(np.sort(merged), np.arange(p.t))


class TestClassifyStationarity:
    def test_unconstrained_minimum_is_strongly_stationary(self):
        p = _pair_problem(Q=np.eye(2))
        report = classify_stationarity(p, [0.0, 0.0], MultiplierSet.zeros(p))
        assert report.is_S and report.is_M and report.is_C and report.is_W
        assert report.is_feasible

    def test_negative_biactive_multipliers(self):
        # grad L = q + (mu, nu) = 0 at the origin
        p = _pair_problem(q=[1.0, 1.0])
        m = MultiplierSet(lam=np.zeros(0), eta=np.zeros(0),
                          mu=np.array([-1.0]), nu=np.array([-1.0]))
        report = classify_stationarity(p, [0.0, 0.0], m)
        assert report.is_M
        # both multipliers <= 0 also meets the strong-stationarity sign rule
        assert report.is_S

    def test_mixed_sign_biactive_multipliers(self):
        p = _pair_problem(q=[-1.0, 1.0])
        m = MultiplierSet(lam=np.zeros(0), eta=np.zeros(0),
                          mu=np.array([1.0]), nu=np.array([-1.0]))
        report = classify_stationarity(p, [0.0, 0.0], m)
        assert report.is_W and not report.is_C
        assert not report.is_M and not report.is_S

    def test_product_branch_of_m_condition(self):
        # mu free, nu = 0 satisfies the product branch but not both-negative
        p = _pair_problem(q=[-2.0, 0.0])
        m = MultiplierSet(lam=np.zeros(0), eta=np.zeros(0),
                          mu=np.array([2.0]), nu=np.array([0.0]))
        report = classify_stationarity(p, [0.0, 0.0], m)
        assert report.is_M and not report.is_S

    def test_nonzero_gradient_fails_weak_stationarity(self):
        p = _pair_problem(q=[1.0, 0.0])
        report = classify_stationarity(p, [0.0, 0.0], MultiplierSet.zeros(p))
        assert not report.is_W

    def test_chain_is_monotone_under_fuzzing(self):
        rng = np.random.default_rng(3)
        for _ in range(200):
            p = random_tiny_mpcc(rng)
            x = project_onto_D(rng.normal(size=p.n), p.pair_partition())
            m = MultiplierSet(lam=rng.normal(size=p.r),
                              eta=rng.normal(size=p.s),
                              mu=rng.choice([-1.0, 0.0, 1.0], size=p.t),
                              nu=rng.choice([-1.0, 0.0, 1.0], size=p.t))
            rep = classify_stationarity(p, x, m)
            assert (not rep.is_S or rep.is_M)
            assert (not rep.is_M or rep.is_C)
            assert (not rep.is_C or rep.is_W)


class TestConstraintQualifications:
    def test_licq_biactive_unit_rows(self):
        p = _pair_problem()
        sets = compute_index_sets(p, [0.0, 0.0], MultiplierSet.zeros(p))
        assert check_mpcc_licq(p, [0.0, 0.0], sets) is True

    def test_licq_fails_on_duplicated_rows(self):
        p = QuadraticMpcc.build(n=2, A_g=[[1.0, 0.0], [1.0, 0.0]],
                                b_g=[0.0, 0.0])
        sets = compute_index_sets(p, [0.0, 0.0], MultiplierSet.zeros(p))
        assert check_mpcc_licq(p, [0.0, 0.0], sets) is False

    def test_ssoc_identity_hessian(self):
        p = _pair_problem(Q=np.eye(2))
        m = MultiplierSet.zeros(p)
        sets = compute_index_sets(p, [0.0, 0.0], m)
        assert check_mpcc_ssoc(p, [0.0, 0.0], m, sets) is True

    def test_ssoc_indefinite_branch(self):
        p = _pair_problem(Q=np.diag([1.0, -1.0]))
        m = MultiplierSet.zeros(p)
        sets = compute_index_sets(p, [0.0, 0.0], m)
        assert check_mpcc_ssoc(p, [0.0, 0.0], m, sets) is False

    def test_ssoc_vacuous_on_empty_critical_subspace(self):
        # equalities fix every direction; indefiniteness never gets tested
        p = QuadraticMpcc.build(Q=-np.eye(2), A_h=np.eye(2), b_h=np.zeros(2))
        m = MultiplierSet.zeros(p)
        sets = compute_index_sets(p, [0.0, 0.0], m)
        assert check_mpcc_ssoc(p, [0.0, 0.0], m, sets) is True

    def test_ssoc_positive_definite_hessian_fuzz(self):
        rng = np.random.default_rng(4)
        for _ in range(20):
            p = random_tiny_mpcc(rng)  # Q = basis^T basis + I/2 is PD
            x = project_onto_D(rng.normal(size=p.n), p.pair_partition())
            m = MultiplierSet.zeros(p)
            sets = compute_index_sets(p, x, m)
            assert check_mpcc_ssoc(p, x, m, sets) is True

    def test_ssoc_branch_guard_skips(self):
        t = 21
        rows = np.zeros((t, 2 * t))
        cols = np.zeros((t, 2 * t))
        rows[np.arange(t), np.arange(t)] = 1.0
        cols[np.arange(t), t + np.arange(t)] = 1.0
        p = QuadraticMpcc.build(n=2 * t, A_G=rows, b_G=np.zeros(t),
                                A_H=cols, b_H=np.zeros(t),
                                coordinate_selection=True)
        m = MultiplierSet.zeros(p)
        x = np.zeros(2 * t)
        sets = compute_index_sets(p, x, m)
        assert check_mpcc_ssoc(p, x, m, sets) is None


class TestInstanceFiles:
    def test_roundtrip_preserves_everything(self, tmp_path):
        rng = np.random.default_rng(5)
        p = random_tiny_mpcc(rng)
        path = tmp_path / "instance.json"
        save_instance(p, path)
        q = load_instance(path)
        assert (q.n, q.r, q.s, q.t) == (p.n, p.r, p.s, p.t)
        assert q.coordinate_selection == p.coordinate_selection
        assert q.c0 == p.c0
        for name in ("Q", "q", "A_g", "b_g", "A_h", "b_h",
                     "A_G", "b_G", "A_H", "b_H"):
            np.testing.assert_array_equal(getattr(q, name), getattr(p, name))

    def test_roundtrip_of_sparse_blocks(self, tmp_path):
        # mostly-zero Q exercises the coordinate-list encoding
        Q = np.zeros((40, 40))
        Q[3, 7] = Q[7, 3] = 1.5
        p = QuadraticMpcc.build(Q=Q, q=np.zeros(40))
        path = tmp_path / "sparse.json"
        save_instance(p, path)
        np.testing.assert_array_equal(load_instance(path).Q, Q)
