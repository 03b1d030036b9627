"""The communication-round engine: local steps, aggregation, and the global step.

One round runs K local gradient steps per (objective, client) pair from the
synchronized global point, ships the accumulated per-objective updates back,
averages them over each objective's owner set, solves the min-norm weighting,
and moves the global model along the combined direction.  Client updates are
pure functions of the round inputs and counter-based streams, so serial and
parallel execution produce bit-identical trajectories.
"""

from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from . import metrics
from .core import (ExperimentConfig, IndicatorMatrix, RoundRecord, client_stream,
                   output_stream)
from .minnorm import solve_min_norm

__all__ = [
    "ClientRoundOutput",
    "TrajectoryLog",
    "DivergenceError",
    "client_update_full",
    "client_update_stochastic",
    "server_aggregate",
    "run_round",
    "run_experiment",
    "sample_weighted_index",
    "pick_weighted_output",
    "descent_step_limit",
    "strongly_convex_step_limit",
]

# Trajectory norm beyond which a run is aborted as divergent.
DIVERGENCE_NORM = 1e8


class DivergenceError(RuntimeError):
    """A local iterate went non-finite; carries (round, client, objective, step)."""

    def __init__(self, round_index, client, objective, step):
        self.round_index = round_index
        self.client = client
        self.objective = objective
        self.step = step
        super().__init__(f"non-finite iterate at round {round_index}, client {client}, "
                         f"objective {objective}, local step {step}")


@dataclass(frozen=True)
class ClientRoundOutput:
    """Accumulated per-objective updates from one client, plus drift diagnostics."""

    client: int
    deltas: dict
    drift: dict

    def __post_init__(self):
        for s, v in self.deltas.items():
            if not np.isfinite(v).all():
                raise ValueError(f"non-finite accumulated update for objective {s}")


@dataclass
class TrajectoryLog:
    """Ordered round records plus the run's outputs and termination status."""

    records: list = field(default_factory=list)
    final_point: np.ndarray | None = None
    weighted_output: np.ndarray | None = None
    config: ExperimentConfig | None = None
    termination: str = "completed"

    def series(self, name: str) -> np.ndarray:
        """Per-round column as an array; missing optional values become NaN."""
        vals = [getattr(r, name) for r in self.records]
        return np.array([np.nan if v is None else v for v in vals], dtype=np.float64)

    @property
    def weights_matrix(self) -> np.ndarray:
        return np.vstack([r.weights for r in self.records])


def descent_step_limit(smoothness: float) -> float:
    """Largest server step with the per-round common-descent guarantee, 3/(2(1+L))."""
    return 3.0 / (2.0 * (1.0 + smoothness))


def strongly_convex_step_limit(smoothness: float, mu: float) -> float:
    """Server step ceiling for the strongly convex linear-rate regime."""
    return min(descent_step_limit(smoothness), 1.0 / (2.0 * smoothness + mu))


def client_update_full(x_t, client, owned, K, eta_local, problem, round_index=0):
    """K full-gradient local steps per owned objective from the synced point.

    Each owned objective keeps its own local iterate, initialized at ``x_t``.
    The returned accumulated update is the plain sum of the K gradients used
    along the trajectory (not scaled by the local step size), so K=1 returns
    exactly the gradient at ``x_t`` and eta_local=0 returns K times that.
    """
    deltas = {}
    drift = {}
    with np.errstate(over="ignore", invalid="ignore"):  # overflow is reported below
        for s in owned:
            x_loc = x_t.copy()
            acc = np.zeros_like(x_t)
            for k in range(K):
                g = problem.grad(s, client, x_loc)
                acc += g
                x_loc = x_loc - eta_local * g
                if not np.isfinite(x_loc).all():
                    raise DivergenceError(round_index, client, s, k)
            deltas[s] = acc
            drift[s] = float(np.linalg.norm(x_loc - x_t))
    return ClientRoundOutput(client, deltas, drift)


def client_update_stochastic(x_t, client, owned, K, eta_local, batch, problem, seed,
                             round_index=0, sample_sharing="per_client"):
    """K minibatch-gradient local steps per owned objective.

    Batch indices are drawn (uniformly with replacement) from counter-based
    streams keyed by (client, round, step), so re-running with the same seed
    reproduces the exact sample sequence.  Under ``per_client`` sharing the
    step-k batch is drawn once and reused by every objective this client
    owns; ``per_objective`` extends the stream key by the objective index and
    draws independently.  ``batch=None`` or a batch covering the shard uses
    the exact shard gradient.
    """
    n_shard = problem.shard_size(client)
    if batch is not None and batch < 1:
        raise ValueError(f"batch must be >= 1, got {batch}")
    if batch is not None and batch > n_shard:
        raise ValueError(f"client {client} shard has {n_shard} samples, "
                         f"smaller than batch {batch}")
    # batch None or covering the shard: exact gradient, no draws
    batch_size = batch if (batch is not None and batch < n_shard) else None

    shared_batches = None
    if batch_size is not None and sample_sharing == "per_client":
        shared_batches = [client_stream(seed, client, round_index, k).integers(0, n_shard, batch_size)
                          for k in range(K)]

    deltas = {}
    drift = {}
    with np.errstate(over="ignore", invalid="ignore"):  # overflow is reported below
        for s in owned:
            x_loc = x_t.copy()
            acc = np.zeros_like(x_t)
            for k in range(K):
                if batch_size is None:
                    idx = None
                elif shared_batches is not None:
                    idx = shared_batches[k]
                else:
                    idx = client_stream(seed, client, round_index, k,
                                        objective=s).integers(0, n_shard, batch_size)
                g = problem.stoch_grad(s, client, x_loc, idx)
                acc += g
                x_loc = x_loc - eta_local * g
                if not np.isfinite(x_loc).all():
                    raise DivergenceError(round_index, client, s, k)
            deltas[s] = acc
            drift[s] = float(np.linalg.norm(x_loc - x_t))
    return ClientRoundOutput(client, deltas, drift)


def server_aggregate(outputs, indicator: IndicatorMatrix, K: int,
                     normalize_delta_by_K: bool = True, client_weights=None) -> np.ndarray:
    """Average accumulated updates over each objective's owner set.

    Summation runs in ascending client order for reproducibility.  The
    balanced 1/|R_s| average is the default; ``client_weights`` switches to a
    weighted average proportional to the given per-client weights (normalized
    within each owner set), for imbalanced shard sizes.  With
    ``normalize_delta_by_K`` the result is further divided by K.
    """
    by_client = {out.client: out for out in outputs}
    if len(by_client) != len(outputs):
        raise ValueError("duplicate client outputs")
    for i in range(indicator.n_clients):
        if i not in by_client:
            raise ValueError(f"missing output for client {i}")
        expected = set(indicator.client_objectives[i])
        got = set(by_client[i].deltas)
        if got != expected:
            raise ValueError(f"client {i} returned objectives {sorted(got)}, "
                             f"expected {sorted(expected)}")

    d = next(iter(by_client[0].deltas.values())).shape[0]
    agg = np.zeros((indicator.n_objectives, d))
    for s, owners in enumerate(indicator.owner_sets):
        if client_weights is None:
            for i in owners:
                agg[s] += by_client[i].deltas[s]
            agg[s] /= len(owners)
        else:
            w = np.array([client_weights[i] for i in owners], dtype=np.float64)
            w /= w.sum()
            for pos, i in enumerate(owners):
                agg[s] += w[pos] * by_client[i].deltas[s]
    if normalize_delta_by_K:
        agg /= K
    return agg


def _dispatch_clients(x_t, config, problem, round_index, executor):
    def one(i):
        owned = config.indicator.client_objectives[i]
        if config.mode == "full_gradient":
            return client_update_full(x_t, i, owned, config.K, config.eta_local,
                                      problem, round_index)
        return client_update_stochastic(x_t, i, owned, config.K, config.eta_local,
                                        config.batch_size, problem, config.seed,
                                        round_index, config.sample_sharing)

    if executor is None:
        return [one(i) for i in range(config.M)]
    return list(executor.map(one, range(config.M)))


def run_round(round_index, x_t, config, problem, *, minnorm_tol=1e-10,
              executor=None, log_lambda_drift=True):
    """One communication round; returns (next point, round record).

    Metrics in the record refer to the round's start point: the losses, the
    true-gradient stationarity measure under the round's weights, and the
    optimality gap when the problem has a scalarization reference.
    """
    outputs = _dispatch_clients(x_t, config, problem, round_index, executor)
    delta = server_aggregate(outputs, config.indicator, config.K,
                             config.normalize_delta_by_K, config.client_weights)
    try:
        sol = solve_min_norm(delta, tol=minnorm_tol)
    except ValueError as exc:
        raise RuntimeError(f"round {round_index}: min-norm solve failed: {exc}") from exc

    dbar = metrics.dbar_norm_sq(sol.weights, x_t, problem)
    losses = problem.losses(x_t)
    dq = metrics.delta_q(sol.weights, x_t, problem) if problem.has_pareto_reference else None
    drift = metrics.lambda_drift(sol.weights, x_t, problem,
                                 tol=minnorm_tol) if log_lambda_drift else None
    snap = None
    if config.snapshot_every > 0 and round_index % config.snapshot_every == 0:
        snap = x_t.copy()
    record = RoundRecord(t=round_index, weights=sol.weights, d_norm_sq=sol.norm_sq,
                         dbar_norm_sq=dbar, losses=losses, delta_q=dq,
                         fw_gap=sol.fw_gap, lambda_drift=drift, x_snapshot=snap)
    x_next = x_t - config.eta_global * sol.direction
    return x_next, record


class _WeightedReservoir:
    """Single-pass weighted pick of one round index (and payload).

    Round t carries weight (1 - mu*eta/2)^(1-t); the running total is kept in
    log space so long runs cannot overflow.
    """

    def __init__(self, mu, eta, stream):
        half = mu * eta / 2.0
        if not 0.0 < half < 1.0:
            raise ValueError(f"mu*eta/2 must be in (0, 1), got {half}")
        self.log_decay = np.log1p(-half)
        self.stream = stream
        self.log_total = -np.inf
        self.pick = None

    def offer(self, t, payload):
        log_w = (1 - t) * self.log_decay
        self.log_total = np.logaddexp(self.log_total, log_w)
        if self.stream.uniform() < np.exp(log_w - self.log_total):
            self.pick = (t, payload)


def sample_weighted_index(T, mu, eta, stream) -> int:
    """Sample a round index in [1, T] with probability proportional to its weight."""
    if T < 1:
        raise ValueError(f"T must be >= 1, got {T}")
    reservoir = _WeightedReservoir(mu, eta, stream)
    for t in range(1, T + 1):
        reservoir.offer(t, None)
    return reservoir.pick[0]


def pick_weighted_output(traj: TrajectoryLog, mu, eta, stream) -> np.ndarray:
    """Sample the output iterate x_t with the strongly convex weighting.

    Requires the trajectory to carry a snapshot for every round (run with
    ``snapshot_every=1``); the engine's built-in streaming pick avoids that
    requirement during the run itself.
    """
    if not traj.records:
        raise ValueError("empty trajectory")
    reservoir = _WeightedReservoir(mu, eta, stream)
    for rec in traj.records:
        if rec.x_snapshot is None:
            raise ValueError(f"round {rec.t} has no snapshot; rerun with snapshot_every=1")
        reservoir.offer(rec.t, rec.x_snapshot)
    return reservoir.pick[1].copy()


def run_experiment(config: ExperimentConfig, problem, *, n_jobs=1, minnorm_tol=1e-10,
                   log_lambda_drift=True) -> TrajectoryLog:
    """Run T rounds from the configured initial point.

    Deterministic given the config seed, under serial or parallel client
    execution (``n_jobs`` threads).  Divergence (a non-finite local iterate
    or a global point beyond the norm guard) stops the run early; the partial
    log is returned with ``termination`` flagging the reason.  For strongly
    convex problems the weighted output iterate is selected in a streaming
    pass alongside the run.
    """
    x = config.initial_point()
    traj = TrajectoryLog(config=config)
    reservoir = None
    if problem.mu > 0 and 0.0 < problem.mu * config.eta_global / 2.0 < 1.0:
        reservoir = _WeightedReservoir(problem.mu, config.eta_global,
                                       output_stream(config.seed))
    executor = ThreadPoolExecutor(max_workers=n_jobs) if n_jobs > 1 else None
    try:
        for t in range(1, config.T + 1):
            try:
                x_next, record = run_round(t, x, config, problem, minnorm_tol=minnorm_tol,
                                           executor=executor,
                                           log_lambda_drift=log_lambda_drift)
            except DivergenceError as exc:
                traj.termination = f"diverged: {exc}"
                break
            traj.records.append(record)
            if reservoir is not None:
                reservoir.offer(t, x.copy())
            if not np.isfinite(x_next).all() or np.linalg.norm(x_next) > DIVERGENCE_NORM:
                traj.termination = (f"diverged: global point norm exceeded "
                                    f"{DIVERGENCE_NORM:g} at round {t}")
                x = x_next
                break
            x = x_next
    finally:
        if executor is not None:
            executor.shutdown()
    traj.final_point = x
    if reservoir is not None and reservoir.pick is not None:
        traj.weighted_output = reservoir.pick[1]
    return traj
