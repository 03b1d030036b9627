"""Min-norm subproblem: solver, closed form, lattice oracle, certificates."""

import numpy as np
import pytest

from fedmoo.minnorm import closed_form_two, fw_gap, grid_oracle, solve_min_norm


class TestHandInstances:
    def test_symmetric_pair_gives_midpoint(self):
        sol = solve_min_norm(np.array([[1.0, 0.0], [0.0, 1.0]]))
        assert np.allclose(sol.weights, [0.5, 0.5], atol=1e-12)
        assert np.allclose(sol.direction, [0.5, 0.5], atol=1e-12)
        assert sol.norm_sq == pytest.approx(0.5, abs=1e-12)
        assert sol.converged

    def test_opposing_vectors_cancel_to_stationarity(self):
        sol = solve_min_norm(np.array([[1.0, 0.0], [-1.0, 0.0]]))
        assert sol.norm_sq <= 1e-20
        assert np.allclose(sol.weights, [0.5, 0.5], atol=1e-10)

    def test_collinear_picks_shorter_vector(self):
        sol = solve_min_norm(np.array([[2.0, 0.0], [1.0, 0.0]]))
        assert np.allclose(sol.weights, [0.0, 1.0], atol=1e-12)
        assert np.allclose(sol.direction, [1.0, 0.0], atol=1e-12)
        assert sol.norm_sq == pytest.approx(1.0, abs=1e-12)

    def test_single_row_degenerates_to_that_row(self):
        g = np.array([[3.0, -4.0]])
        sol = solve_min_norm(g)
        assert np.array_equal(sol.weights, [1.0])
        assert np.array_equal(sol.direction, g[0])
        assert sol.norm_sq == pytest.approx(25.0)

    def test_empty_and_nonfinite_inputs_rejected(self):
        with pytest.raises(ValueError):
            solve_min_norm(np.empty((0, 3)))
        with pytest.raises(ValueError):
            solve_min_norm(np.array([[np.nan, 1.0]]))

    def test_max_iter_exhaustion_is_flagged(self):
        G = np.array([[1.0, 0.2, 0.0], [-0.4, 1.0, 0.1], [0.1, -0.9, 1.0]])
        sol = solve_min_norm(G, tol=1e-14, max_iter=1)
        assert not sol.converged
        assert sol.termination == "max_iter"


class TestSolverProperties:
    def test_matches_grid_oracle_on_random_instances(self):
        for case in range(40):
            rng = np.random.default_rng([81, case])
            G = rng.uniform(-1, 1, (3, 4))
            sol = solve_min_norm(G)
            _, oracle = grid_oracle(G, 1e-2, refine_to=1e-3)
            assert sol.norm_sq <= oracle + 1e-6  # solver at least as good as lattice
            assert oracle <= sol.norm_sq + 2.0 * 1e-2  # lattice within C*step

    def test_objective_sequence_non_increasing(self):
        rng = np.random.default_rng(17)
        for _ in range(20):
            objs = []
            solve_min_norm(rng.uniform(-1, 1, (4, 3)),
                           callback=lambda it, lam, obj: objs.append(obj))
            diffs = np.diff(objs)
            assert (diffs <= 1e-12).all()

    def test_feasibility_is_exact(self):
        rng = np.random.default_rng(23)
        for _ in range(50):
            sol = solve_min_norm(rng.standard_normal((3, 5)))
            assert (sol.weights >= 0).all()
            assert abs(sol.weights.sum() - 1.0) <= 1e-12
            assert sol.norm_sq == pytest.approx(float(sol.direction @ sol.direction),
                                                rel=1e-12, abs=1e-300)

    def test_converged_flag_certified_by_gap(self):
        rng = np.random.default_rng(29)
        for _ in range(30):
            G = rng.uniform(-1, 1, (3, 3))
            sol = solve_min_norm(G, tol=1e-10)
            if sol.converged:
                assert fw_gap(G, sol.weights) <= 1e-10

    def test_zero_in_hull_detected_as_stationary(self):
        rng = np.random.default_rng(31)
        for _ in range(20):
            # construct rows whose convex combination with known weights is zero
            w = rng.dirichlet(np.ones(3))
            g1, g2 = rng.standard_normal((2, 4))
            g3 = -(w[0] * g1 + w[1] * g2) / w[2]
            sol = solve_min_norm(np.vstack([g1, g2, g3]), tol=1e-10)
            assert sol.norm_sq <= 1e-10

    def test_permutation_equivariance(self):
        rng = np.random.default_rng(37)
        G = rng.standard_normal((3, 4))
        perm = np.array([2, 0, 1])
        direct = solve_min_norm(G)
        permuted = solve_min_norm(G[perm])
        assert np.allclose(permuted.weights, direct.weights[perm], atol=1e-12)
        assert permuted.norm_sq == pytest.approx(direct.norm_sq, abs=1e-12)


class TestClosedFormTwo:
    def test_symmetric_pair(self):
        sol = closed_form_two(np.array([1.0, 0.0]), np.array([0.0, 1.0]))
        assert np.allclose(sol.weights, [0.5, 0.5])

    def test_collinear_clips_to_shorter(self):
        sol = closed_form_two(np.array([1.0, 0.0]), np.array([3.0, 0.0]))
        assert np.allclose(sol.weights, [1.0, 0.0])

    def test_equal_vectors_tie_break(self):
        g = np.array([0.3, -0.7])
        sol = closed_form_two(g, g)
        assert np.allclose(sol.weights, [0.5, 0.5])
        assert not sol.degenerate

    def test_two_zero_vectors_flagged_degenerate(self):
        sol = closed_form_two(np.zeros(3), np.zeros(3))
        assert sol.degenerate
        assert np.allclose(sol.weights, [0.5, 0.5])
        assert sol.norm_sq == 0.0

    def test_agrees_with_iterative_solver(self):
        for case in range(100):
            rng = np.random.default_rng([91, case])
            g1, g2 = rng.standard_normal((2, 5))
            direct = closed_form_two(g1, g2)
            iterative = solve_min_norm(np.vstack([g1, g2]))
            assert direct.norm_sq == pytest.approx(iterative.norm_sq, abs=1e-8)


class TestFwGap:
    def test_zero_at_optimum_of_symmetric_pair(self):
        G = np.array([[1.0, 0.0], [0.0, 1.0]])
        assert fw_gap(G, np.array([0.5, 0.5])) <= 1e-10

    def test_hand_value_at_vertex(self):
        G = np.array([[1.0, 0.0], [0.0, 1.0]])
        assert fw_gap(G, np.array([1.0, 0.0])) == pytest.approx(2.0)

    def test_bounds_suboptimality(self):
        rng = np.random.default_rng(43)
        for _ in range(30):
            G = rng.uniform(-1, 1, (3, 4))
            opt = solve_min_norm(G).norm_sq
            lam = rng.dirichlet(np.ones(3))
            u = lam @ G
            assert fw_gap(G, lam) >= float(u @ u) - opt - 1e-10


class TestGridOracle:
    def test_symmetric_pair_value(self):
        _, nsq = grid_oracle(np.array([[1.0, 0.0], [0.0, 1.0]]), 0.01)
        assert nsq == pytest.approx(0.5, abs=1e-4)

    def test_cancellation(self):
        _, nsq = grid_oracle(np.array([[1.0, 0.0], [-1.0, 0.0]]), 0.01)
        assert nsq <= 1e-4

    def test_too_many_objectives_rejected(self):
        with pytest.raises(ValueError, match="S <= 4"):
            grid_oracle(np.ones((5, 2)), 0.1)

    def test_bad_step_rejected(self):
        with pytest.raises(ValueError, match="step"):
            grid_oracle(np.ones((2, 2)), 0.7)

    def test_refinement_never_hurts(self):
        rng = np.random.default_rng(47)
        for _ in range(20):
            G = rng.uniform(-1, 1, (3, 3))
            _, coarse = grid_oracle(G, 1e-2)
            _, fine = grid_oracle(G, 1e-2, refine_to=1e-3)
            assert fine <= coarse + 1e-15
