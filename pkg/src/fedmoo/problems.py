"""Synthetic multi-objective problem suites with per-client data shards.

Each suite exposes per-(objective, client) losses and exact gradients, an
unbiased minibatch gradient sampler, and the curvature constants the round
engine's step-size bounds need.  The quadratic suite additionally carries a
closed-form map from simplex weights to the exact minimizer of the weighted
scalarization, which is what makes the optimality-gap metric computable.

Heterogeneity is controlled by explicit knobs: client centers or coefficients
are spread around the objective's base parameters, and data shards can be
partitioned i.i.d. or with label skew (each client seeing at most a fixed
number of distinct labels).
"""

from __future__ import annotations

import struct
from dataclasses import dataclass

import numpy as np
from scipy.optimize import minimize

from .core import ConfigError, ExperimentConfig, IndicatorMatrix

__all__ = [
    "Problem",
    "QuadraticProblem",
    "TanhRidgeProblem",
    "LogisticTasksProblem",
    "quadratic_suite",
    "toy_nonconvex_suite",
    "synthetic_classification_suite",
    "PartitionPlan",
    "partition",
    "save_dataset",
    "load_dataset",
    "build_problem",
]

# |d/dz tanh'(z)| peaks at 4 / (3 sqrt(3)); scales the tanh Hessian bound.
_TANH_CURV = 4.0 / (3.0 * np.sqrt(3.0))

# Sub-seeds separating the independent generation stages of a suite.
_TAG_QUAD, _TAG_TANH, _TAG_CLS, _TAG_PART, _TAG_CENTERS = 11, 12, 13, 14, 15


def _rng(seed, tag: int) -> np.random.Generator:
    return np.random.default_rng([int(seed) & (2**64 - 1), tag])


def _as_indicator(A) -> IndicatorMatrix:
    return A if isinstance(A, IndicatorMatrix) else IndicatorMatrix(np.asarray(A))


class Problem:
    """Base class for federated multi-objective problems.

    Subclasses implement the per-(objective, client) surface; the global
    objective for s is the average of ``loss(s, i, .)`` over the owner set,
    accumulated in ascending client order so that every consumer sees
    bit-identical values.
    """

    name = "problem"

    def __init__(self, indicator: IndicatorMatrix, d: int):
        self.indicator = indicator
        self.S = indicator.n_objectives
        self.M = indicator.n_clients
        self.d = d
        self.mu = 0.0
        self.smoothness = 0.0
        self.grad_bound: float | None = None
        self.stoch_grad_bound: float | None = None
        self.f_min: np.ndarray | None = None

    # per-shard surface -------------------------------------------------
    def loss(self, s: int, i: int, x: np.ndarray) -> float:
        raise NotImplementedError

    def grad(self, s: int, i: int, x: np.ndarray) -> np.ndarray:
        raise NotImplementedError

    def stoch_grad(self, s: int, i: int, x: np.ndarray, indices) -> np.ndarray:
        """Minibatch gradient; ``indices=None`` or a full-shard batch is exact."""
        raise NotImplementedError

    def shard_size(self, i: int) -> int:
        raise NotImplementedError

    # global objectives --------------------------------------------------
    def global_loss(self, s: int, x: np.ndarray) -> float:
        owners = self.indicator.owner_sets[s]
        acc = 0.0
        for i in owners:
            acc += self.loss(s, i, x)
        return acc / len(owners)

    def global_grad(self, s: int, x: np.ndarray) -> np.ndarray:
        owners = self.indicator.owner_sets[s]
        acc = np.zeros(self.d)
        for i in owners:
            acc += self.grad(s, i, x)
        acc /= len(owners)
        return acc

    def losses(self, x: np.ndarray) -> np.ndarray:
        return np.array([self.global_loss(s, x) for s in range(self.S)])

    def gradient_matrix(self, x: np.ndarray) -> np.ndarray:
        return np.vstack([self.global_grad(s, x) for s in range(self.S)])

    # optional closed forms ----------------------------------------------
    def pareto_point(self, weights: np.ndarray) -> np.ndarray:
        """Exact minimizer of the weighted scalarization, when one exists."""
        raise NotImplementedError(f"{self.name} has no closed-form scalarization minimizer")

    @property
    def has_pareto_reference(self) -> bool:
        return type(self).pareto_point is not Problem.pareto_point

    def dataset_matrix(self) -> np.ndarray | None:
        return None


class QuadraticProblem(Problem):
    """Per-shard quadratic bowls q_si/2 ||x - c_si||^2 with anchor-point data.

    Client centers are spread around each objective's base center with the
    mean offset removed, so the base centers are exactly the global minima of
    the homogeneous suite.  Every shard holds ``n_per_client`` anchor points
    whose mean is exactly the client center; a minibatch gradient replaces the
    center by the sampled anchors' mean, giving an exactly unbiased estimate.
    """

    name = "quadratic"

    def __init__(self, indicator, centers, client_centers, client_curv, anchors):
        S, M, n, d = anchors.shape
        super().__init__(indicator, d)
        self.centers = centers
        self.client_centers = client_centers
        self.client_curv = client_curv
        self.anchors = anchors
        self.n_per_client = n
        # mean_j ||a_j - c||^2 completes the closed-form shard loss
        dev = anchors - client_centers[:, :, None, :]
        self._anchor_const = np.einsum("smjd,smjd->sm", dev, dev) / n

        owners = indicator.owner_sets
        self.mean_curv = np.array([client_curv[s, list(owners[s])].mean()
                                   for s in range(self.S)])
        # curvature-weighted effective center of each global objective
        self.eff_centers = np.vstack([
            (client_curv[s, list(owners[s]), None] * client_centers[s, list(owners[s])]).sum(0)
            / client_curv[s, list(owners[s])].sum()
            for s in range(self.S)
        ])
        self.mu = float(self.mean_curv.min())
        self.smoothness = float(max(client_curv[s, i] for s in range(self.S)
                                    for i in owners[s]))
        self.degenerate_pareto = bool(np.ptp(centers, axis=0).max() == 0.0)
        self.f_min = np.array([self.global_loss(s, self.eff_centers[s])
                               for s in range(self.S)])

    def loss(self, s, i, x):
        diff = x - self.client_centers[s, i]
        return 0.5 * self.client_curv[s, i] * (float(diff @ diff) + self._anchor_const[s, i])

    def grad(self, s, i, x):
        return self.client_curv[s, i] * (x - self.client_centers[s, i])

    def stoch_grad(self, s, i, x, indices):
        if indices is None or len(indices) >= self.n_per_client:
            return self.grad(s, i, x)
        return self.client_curv[s, i] * (x - self.anchors[s, i, indices].mean(axis=0))

    def shard_size(self, i):
        return self.n_per_client

    def pareto_point(self, weights):
        w = np.asarray(weights, dtype=np.float64) * self.mean_curv
        return (w @ self.eff_centers) / w.sum()

    def dataset_matrix(self):
        return self.anchors.reshape(-1, self.d)


def quadratic_suite(d, S, centers, curvature, M, A, *, heterogeneity=0.0,
                    curvature_spread=0.0, n_per_client=32, data_spread=1.0,
                    seed=0) -> QuadraticProblem:
    """Build the strongly convex quadratic suite.

    ``heterogeneity`` is the spread radius of client centers around each base
    center; ``curvature_spread`` (in [0, 1)) lets per-shard curvatures vary
    around ``curvature``, which makes accumulated local updates genuinely
    biased and so gives the local-step error floor something to show.  With
    both at zero all shards of an objective are identical.
    """
    indicator = _as_indicator(A)
    if indicator.n_objectives != S or indicator.n_clients != M:
        raise ValueError(f"indicator shape {indicator.entries.shape} != ({S}, {M})")
    if not curvature > 0:
        raise ValueError(f"curvature must be > 0, got {curvature}")
    if not 0 <= curvature_spread < 1:
        raise ValueError(f"curvature_spread must be in [0, 1), got {curvature_spread}")
    centers = np.asarray(centers, dtype=np.float64)
    if centers.shape != (S, d):
        raise ValueError(f"centers must have shape ({S}, {d}), got {centers.shape}")

    rng = _rng(seed, _TAG_QUAD)
    client_centers = np.broadcast_to(centers[:, None, :], (S, M, d)).copy()
    for s, owners in enumerate(indicator.owner_sets):
        if len(owners) > 1 and heterogeneity > 0:
            offs = heterogeneity * rng.standard_normal((len(owners), d))
            offs -= offs.mean(axis=0)
            client_centers[s, list(owners)] += offs
    client_curv = curvature * (1.0 + curvature_spread * rng.uniform(-1.0, 1.0, (S, M)))
    if curvature_spread == 0.0:
        client_curv[:] = curvature

    anchors = client_centers[:, :, None, :] + data_spread * rng.standard_normal(
        (S, M, n_per_client, d))
    anchors -= anchors.mean(axis=2, keepdims=True) - client_centers[:, :, None, :]
    return QuadraticProblem(indicator, centers, client_centers, client_curv, anchors)


class TanhRidgeProblem(Problem):
    """Smooth bounded-gradient non-convex objectives from tanh mixtures.

    f_si(x) = sum_j a_j tanh(<w_j, x> + b_j) + ridge/2 ||x||^2 with per-client
    amplitude and offset perturbations.  Stochastic samples rescale the
    amplitudes by shard-centered factors, so the shard mean recovers the exact
    objective and minibatch gradients are unbiased.
    """

    name = "tanh_ridge"

    def __init__(self, indicator, d, weights, amps, offsets, amp_eps, ridge):
        super().__init__(indicator, d)
        self.term_weights = weights          # (S, J, d), shared across clients
        self.client_amps = amps              # (S, M, J)
        self.client_offsets = offsets        # (S, M, J)
        self.amp_eps = amp_eps               # (S, M, n, J), column-centered
        self.ridge = float(ridge)
        self.n_per_client = amp_eps.shape[2]

        row_norms = np.linalg.norm(weights, axis=2)            # (S, J)
        owners = indicator.owner_sets
        g_bound = 0.0
        d_bound = 0.0
        l_bound = 0.0
        for s in range(self.S):
            for i in owners[s]:
                amp = np.abs(amps[s, i])
                g_bound = max(g_bound, float(amp @ row_norms[s]))
                per_sample = np.abs(amps[s, i] * (1.0 + amp_eps[s, i])) @ row_norms[s]
                d_bound = max(d_bound, float(per_sample.max()))
                l_bound = max(l_bound, _TANH_CURV * float(amp @ row_norms[s] ** 2))
        self.smoothness = l_bound + self.ridge
        self.grad_bound = g_bound if ridge == 0.0 else None
        self.stoch_grad_bound = d_bound if ridge == 0.0 else None
        self.lower_bound = -float(np.abs(amps).sum(axis=2).max()) if ridge == 0.0 else None

    def _tanh(self, s, i, x):
        return np.tanh(self.term_weights[s] @ x + self.client_offsets[s, i])

    def loss(self, s, i, x):
        val = float(self.client_amps[s, i] @ self._tanh(s, i, x))
        return val + 0.5 * self.ridge * float(x @ x)

    def grad(self, s, i, x):
        th = self._tanh(s, i, x)
        g = self.term_weights[s].T @ (self.client_amps[s, i] * (1.0 - th * th))
        return g + self.ridge * x

    def stoch_grad(self, s, i, x, indices):
        if indices is None or len(indices) >= self.n_per_client:
            return self.grad(s, i, x)
        amp = self.client_amps[s, i] * (1.0 + self.amp_eps[s, i, indices].mean(axis=0))
        th = self._tanh(s, i, x)
        return self.term_weights[s].T @ (amp * (1.0 - th * th)) + self.ridge * x

    def shard_size(self, i):
        return self.n_per_client


def toy_nonconvex_suite(d, S, M, A, seed, *, n_terms=6, ridge=0.0,
                        heterogeneity=0.2, amp_noise=0.3,
                        n_per_client=64) -> TanhRidgeProblem:
    """Build the non-convex tanh-mixture suite with reported G and L constants."""
    if d < 2:
        raise ValueError(f"d must be >= 2, got {d}")
    indicator = _as_indicator(A)
    if indicator.n_objectives != S or indicator.n_clients != M:
        raise ValueError(f"indicator shape {indicator.entries.shape} != ({S}, {M})")
    rng = _rng(seed, _TAG_TANH)

    weights = rng.standard_normal((S, n_terms, d)) / np.sqrt(d)
    base_amp = rng.uniform(0.5, 1.5, (S, n_terms)) * rng.choice([-1.0, 1.0], (S, n_terms))
    base_off = rng.standard_normal((S, n_terms))
    amps = base_amp[:, None, :] * (1.0 + heterogeneity * rng.uniform(-1.0, 1.0, (S, M, n_terms)))
    offsets = base_off[:, None, :] + heterogeneity * rng.standard_normal((S, M, n_terms))
    eps = amp_noise * rng.standard_normal((S, M, n_per_client, n_terms))
    eps -= eps.mean(axis=2, keepdims=True)
    return TanhRidgeProblem(indicator, d, weights, amps, offsets, eps, ridge)


class LogisticTasksProblem(Problem):
    """S binary logistic tasks on per-task views of shared mixture samples.

    Every sample has one raw vector: a shared leading block plus an own-view
    core that task s reads through its own orthogonal rotation (the
    two-sub-image structure of multi-task digit benchmarks, linearized).
    Task s touches only its model columns: the shared block plus its own
    block ending in its bias, and the ridge penalty acts on that view alone.
    With no shared block the tasks decouple exactly, so the joint optimum
    attains every task's individual minimum and loss-gap thresholds are
    reachable; rotated views of one labeling additionally keep the tasks
    matched in difficulty, which keeps the min-norm weights balanced instead
    of starving whichever task converges last.  ``f_min`` holds each task's
    global minimum (solved numerically at build time) so the loss-gap series
    is available.
    """

    name = "logistic_tasks"

    def __init__(self, indicator, d, raw, components, task_signs, task_cols,
                 n_shared, rotations, plan, ridge):
        super().__init__(indicator, d)
        self.raw = raw                       # (n, m): shared block then own core
        self.components = components         # (n,) mixture component per sample
        self.task_signs = task_signs         # (S, n) in {-1, +1}
        self.task_cols = task_cols           # per task: model columns of its view
        self.n_shared = int(n_shared)
        self.rotations = rotations           # per task: own-core rotation matrix
        self.plan = plan
        self.ridge = float(ridge)
        self.shards = plan.assignment
        # ridge acts per task view, so f_s is flat across other tasks' blocks
        self.mu = 0.0
        self.view_ridge = self.ridge
        # per-task design matrix: shared block, rotated own core, bias column
        h = self.n_shared
        own_core = raw[:, h:]
        ones = np.ones((raw.shape[0], 1))
        self._views = [np.hstack([raw[:, :h], own_core @ rotations[s].T, ones])
                       for s in range(self.S)]

        l_bound = 0.0
        for s in range(self.S):
            for i in indicator.owner_sets[s]:
                Zi = self._views[s][self.shards[i]]
                lam_max = float(np.linalg.eigvalsh(Zi.T @ Zi / len(Zi)).max())
                l_bound = max(l_bound, 0.25 * lam_max + self.ridge)
        self.smoothness = l_bound
        self.f_min = np.array([self._solve_task_min(s) for s in range(self.S)])

    def _margins(self, s, idx, x):
        return self.task_signs[s, idx] * (self._views[s][idx] @ x[self.task_cols[s]])

    def loss(self, s, i, x):
        m = self._margins(s, self.shards[i], x)
        xv = x[self.task_cols[s]]
        return float(np.logaddexp(0.0, -m).mean()) + 0.5 * self.ridge * float(xv @ xv)

    def _grad_from(self, s, idx, x):
        m = self._margins(s, idx, x)
        coef = -self.task_signs[s, idx] / (1.0 + np.exp(m))
        g = np.zeros_like(x)
        cols = self.task_cols[s]
        g[cols] = self._views[s][idx].T @ coef / len(idx) + self.ridge * x[cols]
        return g

    def grad(self, s, i, x):
        return self._grad_from(s, self.shards[i], x)

    def stoch_grad(self, s, i, x, indices):
        shard = self.shards[i]
        if indices is None or len(indices) >= len(shard):
            return self.grad(s, i, x)
        return self._grad_from(s, shard[np.asarray(indices)], x)

    def shard_size(self, i):
        return len(self.shards[i])

    def _solve_task_min(self, s):
        res = minimize(lambda x: (self.global_loss(s, x), self.global_grad(s, x)),
                       np.zeros(self.d), jac=True, method="L-BFGS-B",
                       options={"gtol": 1e-12, "maxiter": 5000})
        return float(res.fun)

    def dataset_matrix(self):
        return np.hstack([self.raw, self.components[:, None].astype(np.float64),
                          self.task_signs.T.astype(np.float64)])


def _haar_rotation(dim, rng) -> np.ndarray:
    q, r = np.linalg.qr(rng.standard_normal((dim, dim)))
    return q * np.sign(np.diag(r))


def synthetic_classification_suite(d, S, M, A, n_per_client, partition_spec, seed, *,
                                   task_overlap=0.0, independent_labels=False,
                                   n_components=10, feature_scale=3.0, ridge=1e-2,
                                   noise=1.0, dataset=None) -> LogisticTasksProblem:
    """Build the multi-task logistic suite on Gaussian-mixture samples.

    The d model coordinates split into a shared block of ``round(task_overlap
    * d)`` coordinates plus one equal block per task (each ending in that
    task's bias); task s reads the shared block and its own orthogonal
    rotation of the sample's own-view core.  ``task_overlap=0`` decouples the
    tasks so the joint optimum reaches every task's individual minimum;
    larger overlaps couple them into genuinely conflicting objectives.  By
    default every task labels the same half of the mixture components
    positive (matched difficulty, like classifying the same digits in two
    sub-images); ``independent_labels`` draws a separate component split per
    task, giving tasks of unequal difficulty.  ``partition_spec`` is either a
    prebuilt :class:`PartitionPlan` or a skew descriptor: ``"iid"`` or
    ``("label_skew", k)``, where the mixture component plays the role of the
    label.  ``dataset`` optionally replays a previously dumped
    (raw features, components, task_signs) triple instead of generating
    fresh data.
    """
    indicator = _as_indicator(A)
    if indicator.n_objectives != S or indicator.n_clients != M:
        raise ValueError(f"indicator shape {indicator.entries.shape} != ({S}, {M})")
    if not 0 <= task_overlap < 1:
        raise ValueError(f"task_overlap must be in [0, 1), got {task_overlap}")
    n_shared = round(task_overlap * d)
    block = (d - n_shared) // S
    if block < 2:
        raise ValueError(f"d={d} too small for {S} task blocks "
                         f"(shared={n_shared}; need >= 2 columns per task)")
    m = n_shared + block - 1  # raw dim: shared block plus the own-view core, no bias
    task_cols = [np.concatenate([np.arange(n_shared),
                                 np.arange(n_shared + s * block, n_shared + (s + 1) * block)])
                 for s in range(S)]
    n_total = M * n_per_client

    rng = _rng(seed, _TAG_CLS)
    # task 0 sees the canonical view; later tasks see Haar-rotated copies
    rotations = [np.eye(block - 1)] + [_haar_rotation(block - 1, rng)
                                       for _ in range(S - 1)]
    if dataset is not None:
        raw, components, task_signs = dataset
        raw = np.asarray(raw, dtype=np.float64)
        components = np.asarray(components, dtype=np.int64)
        task_signs = np.asarray(task_signs, dtype=np.float64)
        n_total = raw.shape[0]
        if raw.shape[1] != m or task_signs.shape != (S, n_total):
            raise ValueError("dataset arrays do not match the d/S/task_overlap layout")
    else:
        means = feature_scale * rng.standard_normal((n_components, m)) / np.sqrt(m)
        components = np.repeat(np.arange(n_components), -(-n_total // n_components))[:n_total]
        components = rng.permutation(components)
        raw = means[components] + noise * rng.standard_normal((n_total, m))
        task_signs = np.empty((S, n_total))
        positive = rng.choice(n_components, n_components // 2, replace=False)
        for s in range(S):
            if independent_labels and s > 0:
                positive = rng.choice(n_components, n_components // 2, replace=False)
            task_signs[s] = np.where(np.isin(components, positive), 1.0, -1.0)

    if isinstance(partition_spec, PartitionPlan):
        plan = partition_spec
        if plan.n_samples != n_total:
            raise ValueError(f"partition covers {plan.n_samples} samples, expected {n_total}")
    else:
        plan = partition(components, M, partition_spec, seed=seed)
    return LogisticTasksProblem(indicator, d, raw, components, task_signs, task_cols,
                                n_shared, rotations, plan, ridge)


@dataclass(frozen=True)
class PartitionPlan:
    """Assignment of sample indices to clients plus the skew that produced it."""

    assignment: tuple
    skew: str
    labels_per_client: int | None = None

    def __post_init__(self):
        shards = tuple(np.asarray(a, dtype=np.int64) for a in self.assignment)
        object.__setattr__(self, "assignment", shards)
        joined = np.concatenate(shards) if shards else np.array([], dtype=np.int64)
        if len(np.unique(joined)) != joined.size:
            raise ValueError("shards overlap")
        if joined.size and (np.sort(joined) != np.arange(joined.size)).any():
            raise ValueError("shards do not cover all sample indices")

    @property
    def n_clients(self) -> int:
        return len(self.assignment)

    @property
    def n_samples(self) -> int:
        return sum(len(a) for a in self.assignment)

    def shard_labels(self, labels) -> list[np.ndarray]:
        labels = np.asarray(labels)
        return [np.unique(labels[idx]) for idx in self.assignment]


def partition(labels, n_clients, skew, seed=0) -> PartitionPlan:
    """Deterministically split sample indices across clients.

    ``skew="iid"`` shuffles and splits as evenly as possible.  With
    ``("label_skew", k)`` every client receives samples from at most k
    distinct labels: client j is assigned the label set
    {(j*k + r) mod C : r < k} and each label's samples are divided evenly
    among the clients holding it.  Raises when the requested skew cannot
    cover every label (M*k < C) or a label has fewer samples than users.
    """
    labels = np.asarray(labels)
    n = labels.shape[0]
    if n_clients < 1:
        raise ValueError(f"n_clients must be >= 1, got {n_clients}")
    rng = _rng(seed, _TAG_PART)

    if skew == "iid":
        perm = rng.permutation(n)
        shards = [np.sort(part) for part in np.array_split(perm, n_clients)]
        return PartitionPlan(tuple(shards), "iid")

    if isinstance(skew, (tuple, list)) and len(skew) == 2 and skew[0] == "label_skew":
        k = int(skew[1])
        if k < 1:
            raise ValueError(f"labels_per_client must be >= 1, got {k}")
        uniq = np.unique(labels)
        C = len(uniq)
        k_eff = min(k, C)
        if n_clients * k_eff < C:
            raise ValueError(
                f"label skew infeasible: {n_clients} clients x {k_eff} labels "
                f"= {n_clients * k_eff} slots cannot cover {C} labels")
        users: list[list[int]] = [[] for _ in range(C)]
        for j in range(n_clients):
            for r in range(k_eff):
                users[(j * k_eff + r) % C].append(j)
        shards: list[list[np.ndarray]] = [[] for _ in range(n_clients)]
        for label_pos, lab in enumerate(uniq):
            idx = np.flatnonzero(labels == lab)
            holders = users[label_pos]
            if len(idx) < len(holders):
                raise ValueError(f"label {lab!r} has {len(idx)} samples for "
                                 f"{len(holders)} clients")
            idx = rng.permutation(idx)
            for holder, chunk in zip(holders, np.array_split(idx, len(holders))):
                shards[holder].append(chunk)
        merged = tuple(np.sort(np.concatenate(parts)) for parts in shards)
        return PartitionPlan(merged, f"label_skew({k})", labels_per_client=k)

    raise ValueError(f"unknown skew descriptor {skew!r}")


# Dataset dump/reload: magic, uint32 version, uint32 d, uint64 n, uint32 S
# header followed by float64 features (n x d), int64 labels (n), float64
# task signs (S x n), all little-endian row-major.
_DATASET_MAGIC = b"FMOODS01"
_DATASET_VERSION = 1


def save_dataset(path, features, labels, task_signs):
    feats = np.ascontiguousarray(features, dtype="<f8")
    labs = np.ascontiguousarray(labels, dtype="<i8")
    signs = np.ascontiguousarray(task_signs, dtype="<f8")
    n, d = feats.shape
    if labs.shape != (n,) or signs.shape[1] != n:
        raise ValueError("inconsistent dataset array shapes")
    with open(path, "wb") as fh:
        fh.write(_DATASET_MAGIC)
        fh.write(struct.pack("<IIQI", _DATASET_VERSION, d, n, signs.shape[0]))
        fh.write(feats.tobytes())
        fh.write(labs.tobytes())
        fh.write(signs.tobytes())


def load_dataset(path):
    """Read back (features, labels, task_signs) written by :func:`save_dataset`."""
    with open(path, "rb") as fh:
        magic = fh.read(len(_DATASET_MAGIC))
        if magic != _DATASET_MAGIC:
            raise ValueError(f"{path}: not a dataset file")
        version, d, n, S = struct.unpack("<IIQI", fh.read(20))
        if version != _DATASET_VERSION:
            raise ValueError(f"{path}: unsupported dataset version {version}")
        feats = np.frombuffer(fh.read(8 * n * d), dtype="<f8").reshape(n, d).copy()
        labs = np.frombuffer(fh.read(8 * n), dtype="<i8").copy()
        signs = np.frombuffer(fh.read(8 * S * n), dtype="<f8").reshape(S, n).copy()
    return feats, labs, signs


def _auto_centers(S, d, seed) -> np.ndarray:
    rng = _rng(seed, _TAG_CENTERS)
    c = rng.standard_normal((S, d))
    return c / np.linalg.norm(c, axis=1, keepdims=True)


def build_problem(config: ExperimentConfig) -> Problem:
    """Construct the problem suite described by ``config.problem``."""
    if config.problem is None:
        raise ConfigError("problem", "configuration has no problem section")
    kind = config.problem.kind
    params = dict(config.problem.params)
    A = config.indicator
    if kind == "quadratic":
        centers = params.pop("centers", "auto")
        if isinstance(centers, str):
            if centers != "auto":
                raise ConfigError("problem.centers", f"expected 'auto' or a list, got {centers!r}")
            centers = _auto_centers(config.S, config.d, config.seed)
        return quadratic_suite(config.d, config.S, centers, params.pop("curvature", 1.0),
                               config.M, A, seed=params.pop("seed", config.seed), **params)
    if kind == "nonconvex":
        return toy_nonconvex_suite(config.d, config.S, config.M, A,
                                   params.pop("seed", config.seed), **params)
    if kind == "classification":
        skew = params.pop("partition", "iid")
        if skew == "label_skew":
            skew = ("label_skew", params.pop("labels_per_client", 2))
        return synthetic_classification_suite(
            config.d, config.S, config.M, A, params.pop("n_per_client", 64),
            skew, params.pop("seed", config.seed), **params)
    raise ConfigError("problem.kind", f"unknown problem kind {kind!r}")
