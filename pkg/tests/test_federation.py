"""Round engine: local steps, aggregation, full rounds, weighted output."""

import numpy as np
import pytest

from fedmoo.core import ExperimentConfig, IndicatorMatrix
from fedmoo.federation import (DivergenceError, client_update_full,
                               client_update_stochastic, descent_step_limit,
                               pick_weighted_output, run_experiment, run_round,
                               sample_weighted_index, server_aggregate)
from fedmoo.core import client_stream, output_stream
from fedmoo.problems import quadratic_suite, toy_nonconvex_suite
from fedmoo.reporting import write_rounds_csv
from fedmoo.verify import mgd_reference


def symmetric_quadratic(M=1, heterogeneity=0.0, seed=0, **kw):
    A = IndicatorMatrix.all_ones(2, M)
    centers = np.array([[1.0, 0.0], [0.0, 1.0]])
    prob = quadratic_suite(2, 2, centers, 1.0, M, A, heterogeneity=heterogeneity,
                           seed=seed, **kw)
    return A, prob


class TestClientUpdateFull:
    def test_single_step_returns_synchronized_gradient(self):
        _, prob = symmetric_quadratic()
        x = np.array([0.2, -0.1])
        out = client_update_full(x, 0, (0, 1), K=1, eta_local=0.5, problem=prob)
        for s in (0, 1):
            assert np.array_equal(out.deltas[s], prob.grad(s, 0, x))

    def test_zero_local_rate_accumulates_k_copies(self):
        _, prob = symmetric_quadratic()
        x = np.array([0.4, 0.4])
        out = client_update_full(x, 0, (0,), K=7, eta_local=0.0, problem=prob)
        assert np.allclose(out.deltas[0], 7 * prob.grad(0, 0, x), atol=1e-14)
        assert out.drift[0] == 0.0

    def test_two_step_hand_recursion(self):
        # f = 1/2 ||x - c||^2 from x=0 with eta_local=0.1: gradients -c, -0.9c
        A = IndicatorMatrix.all_ones(1, 1)
        c = np.array([2.0, -1.0])
        prob = quadratic_suite(2, 1, c[None, :], 1.0, 1, A, seed=0)
        out = client_update_full(np.zeros(2), 0, (0,), K=2, eta_local=0.1, problem=prob)
        assert np.allclose(out.deltas[0], -1.9 * c, atol=1e-15)

    def test_divergence_carries_context(self):
        _, prob = symmetric_quadratic()
        with pytest.raises(DivergenceError) as err:
            client_update_full(np.array([1e300, 0.0]), 0, (0,), K=3,
                               eta_local=1e300, problem=prob, round_index=4)
        assert (err.value.round_index, err.value.client, err.value.objective) == (4, 0, 0)


class TestClientUpdateStochastic:
    def test_full_batch_matches_full_gradient_update(self):
        _, prob = symmetric_quadratic(n_per_client=12)
        x = np.array([0.3, 0.9])
        full = client_update_full(x, 0, (0, 1), K=3, eta_local=0.1, problem=prob)
        stoch = client_update_stochastic(x, 0, (0, 1), K=3, eta_local=0.1,
                                         batch=12, problem=prob, seed=5)
        for s in (0, 1):
            assert np.array_equal(full.deltas[s], stoch.deltas[s])

    def test_same_seed_same_output(self):
        _, prob = symmetric_quadratic(n_per_client=16, data_spread=2.0)
        x = np.array([1.0, -1.0])
        a = client_update_stochastic(x, 0, (0, 1), 4, 0.05, 4, prob, seed=9, round_index=2)
        b = client_update_stochastic(x, 0, (0, 1), 4, 0.05, 4, prob, seed=9, round_index=2)
        for s in (0, 1):
            assert np.array_equal(a.deltas[s], b.deltas[s])

    def test_single_step_expectation_matches_gradient(self):
        _, prob = symmetric_quadratic(n_per_client=16, data_spread=2.0)
        x = np.array([0.5, 0.5])
        draws = np.array([
            client_update_stochastic(x, 0, (0,), 1, 0.1, 4, prob, seed=s).deltas[0]
            for s in range(10_000)])
        se = draws.std(axis=0, ddof=1) / np.sqrt(len(draws))
        assert (np.abs(draws.mean(axis=0) - prob.grad(0, 0, x)) <= 3 * se + 1e-12).all()

    def test_per_client_sharing_reuses_the_step_batch(self):
        # identical objective data => shared sample gives identical deltas
        A = IndicatorMatrix.all_ones(2, 1)
        centers = np.array([[1.0, 0.0], [1.0, 0.0]])
        prob = quadratic_suite(2, 2, centers, 1.0, 1, A, data_spread=2.0, seed=3)
        prob.anchors[1] = prob.anchors[0]  # force equal shards across objectives
        x = np.array([3.0, -2.0])
        shared = client_update_stochastic(x, 0, (0, 1), 1, 0.0, 4, prob, seed=1,
                                          sample_sharing="per_client")
        assert np.array_equal(shared.deltas[0], shared.deltas[1])
        split = client_update_stochastic(x, 0, (0, 1), 1, 0.0, 4, prob, seed=1,
                                         sample_sharing="per_objective")
        assert not np.array_equal(split.deltas[0], split.deltas[1])

    def test_oversized_batch_rejected(self):
        _, prob = symmetric_quadratic(n_per_client=8)
        with pytest.raises(ValueError, match="smaller than batch"):
            client_update_stochastic(np.zeros(2), 0, (0,), 1, 0.1, 9, prob, seed=0)


class TestServerAggregate:
    def test_singleton_average_divides_by_k(self):
        _, prob = symmetric_quadratic()
        x = np.array([0.1, 0.7])
        out = client_update_full(x, 0, (0, 1), K=4, eta_local=0.0, problem=prob)
        agg = server_aggregate([out], prob.indicator, K=4)
        assert np.allclose(agg[0], prob.grad(0, 0, x), atol=1e-15)
        raw = server_aggregate([out], prob.indicator, K=4, normalize_delta_by_K=False)
        assert np.array_equal(raw[0], out.deltas[0])

    def test_identical_clients_average_to_any_single_delta(self):
        A, prob = symmetric_quadratic(M=4, heterogeneity=0.0)
        x = np.array([-0.5, 0.25])
        outs = [client_update_full(x, i, (0, 1), 2, 0.1, prob) for i in range(4)]
        agg = server_aggregate(outs, A, K=2)
        assert np.array_equal(agg[0], outs[0].deltas[0] / 2.0)

    def test_k1_normalized_full_gradient_recovers_global_gradient(self):
        A, prob = symmetric_quadratic(M=4, heterogeneity=0.6, seed=8)
        x = np.array([0.2, 0.2])
        outs = [client_update_full(x, i, (0, 1), 1, 0.3, prob) for i in range(4)]
        agg = server_aggregate(outs, A, K=1)
        for s in (0, 1):
            assert np.array_equal(agg[s], prob.global_grad(s, x))

    def test_missing_client_rejected(self):
        A, prob = symmetric_quadratic(M=2)
        out = client_update_full(np.zeros(2), 0, (0, 1), 1, 0.0, prob)
        with pytest.raises(ValueError, match="missing output for client 1"):
            server_aggregate([out], A, K=1)

    def test_wrong_objectives_rejected(self):
        A = IndicatorMatrix(np.array([[1, 0], [1, 1]]))
        prob = quadratic_suite(2, 2, np.eye(2), 1.0, 2, A, seed=0)
        ok = client_update_full(np.zeros(2), 0, (0, 1), 1, 0.0, prob)
        bad = client_update_full(np.zeros(2), 1, (0,), 1, 0.0, prob)  # owns only (1,)
        with pytest.raises(ValueError, match="client 1"):
            server_aggregate([ok, bad], A, K=1)

    def test_client_weights_give_weighted_average(self):
        A, prob = symmetric_quadratic(M=2, heterogeneity=0.5, seed=4)
        x = np.array([0.6, -0.6])
        outs = [client_update_full(x, i, (0, 1), 1, 0.0, prob) for i in range(2)]
        agg = server_aggregate(outs, A, K=1, client_weights=np.array([3.0, 1.0]))
        expected = 0.75 * outs[0].deltas[0] + 0.25 * outs[1].deltas[0]
        assert np.allclose(agg[0], expected, atol=1e-15)


def base_config(prob, A, **kw):
    args = dict(M=A.n_clients, S=A.n_objectives, indicator=A, d=prob.d, K=1, T=1,
                eta_global=1.0, eta_local=0.1, seed=0)
    args.update(kw)
    return ExperimentConfig(**args)


class TestRunRound:
    def test_symmetric_instance_lands_on_stationary_point(self):
        A, prob = symmetric_quadratic()
        cfg = base_config(prob, A, eta_global=1.0)
        x1, rec1 = run_round(1, np.zeros(2), cfg, prob)
        assert np.allclose(x1, [0.5, 0.5])
        _, rec2 = run_round(2, x1, cfg, prob)
        assert rec2.dbar_norm_sq <= 1e-20

    def test_single_objective_reduces_to_averaged_local_sgd(self):
        A = IndicatorMatrix.all_ones(1, 2)
        prob = quadratic_suite(3, 1, np.array([[1.0, 2.0, 3.0]]), 1.0, 2, A,
                               heterogeneity=0.5, seed=6)
        cfg = base_config(prob, A, K=4, eta_global=0.7, eta_local=0.05)
        x = np.array([0.1, 0.2, 0.3])
        x_next, rec = run_round(1, x, cfg, prob)
        assert np.array_equal(rec.weights, [1.0])
        # hand-rolled FedAvg-style reference: K local GD steps per client
        acc = np.zeros(3)
        for i in range(2):
            x_loc = x.copy()
            delta = np.zeros(3)
            for _ in range(4):
                g = prob.grad(0, i, x_loc)
                delta += g
                x_loc = x_loc - 0.05 * g
            acc += delta
        acc /= 2
        acc /= 4
        assert np.array_equal(x_next, x - 0.7 * acc)

    def test_vanishing_step_changes_nothing(self):
        # the config requires eta_global > 0; a step below one ulp is a null step
        A, prob = symmetric_quadratic()
        cfg = base_config(prob, A, eta_global=1e-300)
        x = np.array([0.5, 0.25])
        x_next, rec = run_round(1, x, cfg, prob)
        assert np.array_equal(x_next, x)
        assert np.array_equal(rec.losses, prob.losses(x))


class TestRunExperiment:
    def test_single_round_log(self):
        A, prob = symmetric_quadratic()
        traj = run_experiment(base_config(prob, A, T=1), prob)
        assert len(traj.records) == 1 and traj.records[0].t == 1
        assert traj.termination == "completed"

    def test_rerun_is_byte_identical(self, tmp_path):
        A, prob = symmetric_quadratic(M=2, heterogeneity=0.3, seed=2)
        cfg = base_config(prob, A, T=20, K=3, eta_global=0.4,
                          mode="stochastic", batch_size=4, seed=11)
        for jobs, name in ((1, "serial.csv"), (3, "threads.csv")):
            write_rounds_csv(tmp_path / name, run_experiment(cfg, prob, n_jobs=jobs))
        a = (tmp_path / "serial.csv").read_bytes()
        b = (tmp_path / "threads.csv").read_bytes()
        assert a == b

    def test_matches_centralized_mgd_bit_for_bit(self):
        A, prob = symmetric_quadratic()
        cfg = base_config(prob, A, T=30, K=1, eta_global=0.5, snapshot_every=1)
        traj = run_experiment(cfg, prob)
        fed = np.vstack([r.x_snapshot for r in traj.records] + [traj.final_point])
        ref = mgd_reference(prob, np.zeros(2), 0.5, 30)
        assert np.array_equal(fed, ref)

    def test_divergence_preserves_partial_log(self):
        A, prob = symmetric_quadratic()
        cfg = base_config(prob, A, T=50, eta_global=5.0)  # far beyond 2/L: diverges
        traj = run_experiment(cfg, prob)
        assert traj.termination.startswith("diverged")
        assert 0 < len(traj.records) < 50

    def test_weighted_output_recorded_for_strongly_convex(self):
        A, prob = symmetric_quadratic(M=2, heterogeneity=0.2, seed=7)
        traj = run_experiment(base_config(prob, A, T=10, eta_global=0.5), prob)
        assert traj.weighted_output is not None
        assert traj.weighted_output.shape == (2,)


class TestWeightedOutputSampler:
    def test_single_round_always_selected(self):
        assert sample_weighted_index(1, 1.0, 0.5, output_stream(0)) == 1

    def test_near_uniform_weights_select_uniformly(self):
        counts = np.zeros(4)
        for rep in range(20_000):
            t = sample_weighted_index(4, 1e-9, 1e-9, client_stream(1, 0, rep, 0))
            counts[t - 1] += 1
        freq = counts / counts.sum()
        se = np.sqrt(0.25 * 0.75 / counts.sum())
        assert (np.abs(freq - 0.25) <= 3 * se).all()

    def test_geometric_weights_one_two_four(self):
        # mu*eta/2 = 0.5 over T=3 rounds puts weights (1, 2, 4)/7 on the iterates
        probs = np.array([1.0, 2.0, 4.0]) / 7.0
        counts = np.zeros(3)
        for rep in range(20_000):
            t = sample_weighted_index(3, 1.0, 1.0, client_stream(2, 0, rep, 0))
            counts[t - 1] += 1
        freq = counts / counts.sum()
        se = np.sqrt(probs * (1 - probs) / counts.sum())
        assert (np.abs(freq - probs) <= 3 * se).all()

    def test_pick_weighted_output_needs_snapshots(self):
        A, prob = symmetric_quadratic()
        traj = run_experiment(base_config(prob, A, T=3, eta_global=0.5), prob)
        with pytest.raises(ValueError, match="snapshot"):
            pick_weighted_output(traj, 1.0, 0.5, output_stream(1))

    def test_pick_weighted_output_returns_round_snapshot(self):
        A, prob = symmetric_quadratic()
        cfg = base_config(prob, A, T=5, eta_global=0.5, snapshot_every=1)
        traj = run_experiment(cfg, prob)
        picked = pick_weighted_output(traj, 1.0, 0.5, output_stream(3))
        snaps = [r.x_snapshot for r in traj.records]
        assert any(np.array_equal(picked, s) for s in snaps)

    def test_invalid_weight_parameters_rejected(self):
        with pytest.raises(ValueError, match="mu\\*eta/2"):
            sample_weighted_index(3, 4.0, 1.0, output_stream(0))


class TestDescentProperty:
    @pytest.mark.parametrize("make", [
        lambda: symmetric_quadratic()[1],
        lambda: toy_nonconvex_suite(3, 2, 1, IndicatorMatrix.all_ones(2, 1), 12,
                                    n_terms=5),
    ])
    def test_every_objective_non_increasing_at_guaranteed_step(self, make):
        prob = make()
        A = prob.indicator
        eta = descent_step_limit(prob.smoothness)
        cfg = base_config(prob, A, T=50, eta_global=eta, eta_local=0.0)
        traj = run_experiment(cfg, prob)
        losses = np.vstack([r.losses for r in traj.records]
                           + [prob.losses(traj.final_point)])
        assert np.diff(losses, axis=0).max() <= 1e-12
