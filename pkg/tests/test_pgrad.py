"""Nonmonotone spectral projected gradient subproblem solver."""

import numpy as np
import pytest

from mpcckit.compgeo import project_onto_C, stationarity_distance
from mpcckit.pgrad import PgradConfig, PgradError, solve_subproblem


def _pair_projector(p):
    a, b = project_onto_C(p[:1], p[1:])
    return np.concatenate([a, b])


def _pair_stationarity(p, grad):
    return stationarity_distance(grad, p, t=1)


def _bowl(center):
    c = np.asarray(center, dtype=float)

    def oracle(x):
        d = x - c
        return float(d @ d), 2.0 * d

    return oracle


class TestSolveSubproblem:
    def test_start_at_interior_minimum_returns_immediately(self):
        x, stat, iters = solve_subproblem(_bowl([2.0, 0.0]), _pair_projector,
                                          [2.0, 0.0], eps=1e-8,
                                          stationarity=_pair_stationarity)
        assert iters == 0
        assert stat == 0.0
        np.testing.assert_array_equal(x, [2.0, 0.0])

    def test_bowl_with_tied_branches(self):
        x, stat, _ = solve_subproblem(_bowl([2.0, 2.0]), _pair_projector,
                                      [0.3, 0.1], eps=1e-8,
                                      stationarity=_pair_stationarity)
        assert stat <= 1e-8
        closest = min([(2.0, 0.0), (0.0, 2.0)],
                      key=lambda c: np.hypot(x[0] - c[0], x[1] - c[1]))
        np.testing.assert_allclose(x, closest, atol=1e-6)

    def test_bowl_clamped_against_the_cone(self):
        # center (-1, 2) is infeasible; the inward x1-gradient is absorbed
        x, stat, _ = solve_subproblem(_bowl([-1.0, 2.0]), _pair_projector,
                                      [5.0, 0.0], eps=1e-8,
                                      stationarity=_pair_stationarity)
        assert stat <= 1e-8
        np.testing.assert_allclose(x, [0.0, 2.0], atol=1e-6)

    def test_accepted_iterates_stay_feasible_and_reference_never_increases(self):
        accepted = []

        def recording_stationarity(p, grad):
            accepted.append(np.array(p))
            return _pair_stationarity(p, grad)

        oracle = _bowl([3.0, 1.0])
        solve_subproblem(oracle, _pair_projector, [10.0, -4.0], eps=1e-10,
                         stationarity=recording_stationarity)
        assert len(accepted) >= 2
        for p in accepted:
            assert p[0] >= 0.0 and p[1] >= 0.0 and p[0] * p[1] == 0.0
        values = [oracle(p)[0] for p in accepted]
        window = PgradConfig().memory_length
        refs = [max(values[max(0, i + 1 - window):i + 1])
                for i in range(len(values))]
        assert all(b <= a for a, b in zip(refs, refs[1:]))

    def test_non_finite_value_raises(self):
        def oracle(x):
            return float("nan"), np.zeros(2)

        with pytest.raises(PgradError):
            solve_subproblem(oracle, _pair_projector, [1.0, 0.0], eps=1e-8)

    def test_non_finite_gradient_raises(self):
        def oracle(x):
            return 1.0, np.array([np.inf, 0.0])

        with pytest.raises(PgradError):
            solve_subproblem(oracle, _pair_projector, [1.0, 0.0], eps=1e-8)

    def test_budget_exhaustion_returns_best_seen(self):
        seen = []

        def recording_stationarity(p, grad):
            s = _pair_stationarity(p, grad)
            seen.append(s)
            return s

        def quartic(x):
            d = x[0] - 2.0
            return float(d ** 4 + x[1] ** 2), np.array([4 * d ** 3, 2 * x[1]])

        cfg = PgradConfig(max_iters=3)
        _, stat, iters = solve_subproblem(quartic, _pair_projector,
                                          [40.0, 0.0], eps=1e-16, cfg=cfg,
                                          stationarity=recording_stationarity)
        assert iters == 3
        assert stat == min(seen)

    def test_reaches_tight_tolerance_on_strongly_convex_objectives(self):
        rng = np.random.default_rng(20)
        for _ in range(5):
            B = rng.normal(size=(2, 2))
            Q = B.T @ B + 0.5 * np.eye(2)
            c = rng.normal(size=2)

            def oracle(x, Q=Q, c=c):
                return float(0.5 * x @ Q @ x + c @ x), Q @ x + c

            _, stat, iters = solve_subproblem(oracle, _pair_projector,
                                              rng.normal(size=2), eps=1e-8,
                                              stationarity=_pair_stationarity)
            assert stat <= 1e-8
            assert iters < PgradConfig().max_iters

    def test_defaults_are_pinned(self):
        cfg = PgradConfig()
        assert cfg.memory_length == 10
        assert cfg.step_bounds == (1e-10, 1e10)
        assert cfg.delta == 1e-4
        assert cfg.backtrack == 0.5
        assert cfg.max_iters == 50_000
