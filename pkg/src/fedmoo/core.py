"""Shared domain types, deterministic random streams, and experiment configuration.

The simulator routes S objectives over M clients through a binary indicator
matrix: entry (s, i) is 1 when client i holds data for objective s.  Model
points, per-objective direction rows, and simplex weight vectors are plain
float64 numpy arrays; the validators below enforce their invariants at module
boundaries instead of wrapping every vector in a class.
"""

from __future__ import annotations

from dataclasses import dataclass, field
import numpy as np

__all__ = [
    "ConfigError",
    "IndicatorMatrix",
    "derive_owner_sets",
    "client_stream",
    "as_model_point",
    "as_direction_set",
    "validate_simplex",
    "ProblemConfig",
    "ExperimentConfig",
    "RoundRecord",
]

# Sum-to-one slack allowed for simplex weight vectors.
SIMPLEX_ATOL = 1e-12

# Stream-domain tags keep client streams, the output sampler, and any future
# consumers of the experiment seed on disjoint key prefixes.
_DOMAIN_CLIENT = 0
_DOMAIN_OUTPUT = 1


class ConfigError(ValueError):
    """Invalid experiment configuration; ``path`` names the offending field."""

    def __init__(self, path: str, message: str):
        self.path = path
        super().__init__(f"{path}: {message}" if path else message)


def derive_owner_sets(entries) -> list[tuple[int, ...]]:
    """Owner sets R_s = {i : a_si = 1} for each objective row, clients ascending.

    Validates the indicator invariants: entries binary, every objective owned
    by at least one client, every client owning at least one objective.
    Raises ``ConfigError`` naming the offending row/column otherwise.
    """
    a = np.asarray(entries)
    if a.ndim != 2 or a.size == 0:
        raise ConfigError("indicator", f"expected a nonempty 2-D matrix, got shape {a.shape}")
    if not np.isin(a, (0, 1)).all():
        raise ConfigError("indicator", "entries must be 0 or 1")
    owners = []
    for s in range(a.shape[0]):
        row = np.flatnonzero(a[s])
        if row.size == 0:
            raise ConfigError("indicator", f"objective {s} has no owning client (empty row)")
        owners.append(tuple(int(i) for i in row))
    for i in range(a.shape[1]):
        if not a[:, i].any():
            raise ConfigError("indicator", f"client {i} owns no objective (empty column)")
    return owners


@dataclass(frozen=True)
class IndicatorMatrix:
    """Binary S x M routing of objectives to clients.

    ``owner_sets[s]`` lists the clients holding objective s;
    ``client_objectives[i]`` lists the objectives client i works on.
    """

    entries: np.ndarray
    owner_sets: tuple[tuple[int, ...], ...] = field(init=False, repr=False)
    client_objectives: tuple[tuple[int, ...], ...] = field(init=False, repr=False)

    def __post_init__(self):
        a = np.asarray(self.entries, dtype=np.int64)
        owners = derive_owner_sets(a)
        object.__setattr__(self, "entries", a)
        object.__setattr__(self, "owner_sets", tuple(owners))
        cols = tuple(tuple(int(s) for s in np.flatnonzero(a[:, i])) for i in range(a.shape[1]))
        object.__setattr__(self, "client_objectives", cols)
        self.entries.setflags(write=False)

    @property
    def n_objectives(self) -> int:
        return self.entries.shape[0]

    @property
    def n_clients(self) -> int:
        return self.entries.shape[1]

    @classmethod
    def identity(cls, n: int) -> "IndicatorMatrix":
        """One distinct objective per client (S = M = n)."""
        return cls(np.eye(n, dtype=np.int64))

    @classmethod
    def all_ones(cls, n_objectives: int, n_clients: int) -> "IndicatorMatrix":
        """Every client shares every objective."""
        return cls(np.ones((n_objectives, n_clients), dtype=np.int64))


def client_stream(seed: int, client: int, round_index: int, step: int,
                  objective: int | None = None) -> np.random.Generator:
    """Independent counter-based random stream for one (client, round, step).

    Streams are Philox generators keyed by the experiment seed and the index
    triple, so identical inputs yield identical draws regardless of the order
    or parallelism in which clients execute.  ``objective`` extends the key
    for per-objective sampling; leaving it ``None`` gives the per-client
    stream shared by all of that client's objectives.
    """
    for name, v in (("client", client), ("round", round_index), ("step", step)):
        if v < 0:
            raise ValueError(f"{name} index must be nonnegative, got {v}")
    key = [_DOMAIN_CLIENT, client, round_index, step]
    if objective is not None:
        if objective < 0:
            raise ValueError(f"objective index must be nonnegative, got {objective}")
        key.append(1 + objective)
    ss = np.random.SeedSequence(entropy=int(seed) & (2**64 - 1), spawn_key=tuple(key))
    return np.random.Generator(np.random.Philox(ss))


def output_stream(seed: int) -> np.random.Generator:
    """Stream reserved for the weighted-output round sampler."""
    ss = np.random.SeedSequence(entropy=int(seed) & (2**64 - 1), spawn_key=(_DOMAIN_OUTPUT,))
    return np.random.Generator(np.random.Philox(ss))


def as_model_point(x, d: int | None = None) -> np.ndarray:
    """Validate and return a model point as a 1-D float64 array."""
    v = np.asarray(x, dtype=np.float64)
    if v.ndim != 1:
        raise ValueError(f"model point must be 1-D, got shape {v.shape}")
    if d is not None and v.shape[0] != d:
        raise ValueError(f"model point has dimension {v.shape[0]}, expected {d}")
    if not np.isfinite(v).all():
        raise ValueError("model point contains non-finite entries")
    return v


def as_direction_set(rows, n_objectives: int | None = None) -> np.ndarray:
    """Validate an S x d matrix of per-objective directions."""
    g = np.asarray(rows, dtype=np.float64)
    if g.ndim == 1:
        g = g[None, :]
    if g.ndim != 2 or g.shape[0] == 0:
        raise ValueError(f"direction set must be a nonempty 2-D matrix, got shape {g.shape}")
    if n_objectives is not None and g.shape[0] != n_objectives:
        raise ValueError(f"direction set has {g.shape[0]} rows, expected {n_objectives}")
    if not np.isfinite(g).all():
        raise ValueError("direction set contains non-finite entries")
    return g


def validate_simplex(weights, atol: float = SIMPLEX_ATOL) -> np.ndarray:
    """Check nonnegativity and unit sum of a simplex weight vector."""
    w = np.asarray(weights, dtype=np.float64)
    if w.ndim != 1 or w.size == 0:
        raise ValueError("simplex weights must be a nonempty 1-D vector")
    if (w < 0).any():
        raise ValueError(f"simplex weights must be nonnegative, min is {w.min()}")
    if abs(w.sum() - 1.0) > atol:
        raise ValueError(f"simplex weights sum to {w.sum()!r}, expected 1 within {atol}")
    return w


@dataclass(frozen=True)
class ProblemConfig:
    """Declarative description of a synthetic problem suite (see config schema)."""

    kind: str
    params: dict


_MODES = ("full_gradient", "stochastic")
_SHARING = ("per_client", "per_objective")


@dataclass(frozen=True)
class ExperimentConfig:
    """Immutable description of one experiment run.

    ``eta_global`` is the server step size applied to the combined direction;
    ``eta_local`` drives the K per-objective steps each client takes between
    synchronizations.  With ``normalize_delta_by_K`` the accumulated client
    update is divided by K before aggregation, so the server step size stays
    comparable across K; switching it off returns the raw accumulated sum.
    """

    M: int
    S: int
    indicator: IndicatorMatrix
    d: int
    K: int
    T: int
    eta_global: float
    eta_local: float
    mode: str = "full_gradient"
    batch_size: int | None = None
    seed: int = 0
    sample_sharing: str = "per_client"
    normalize_delta_by_K: bool = True
    problem: ProblemConfig | None = None
    init: np.ndarray | None = None
    snapshot_every: int = 0
    client_weights: np.ndarray | None = None
    name: str = "run"

    def __post_init__(self):
        if self.indicator.n_objectives != self.S or self.indicator.n_clients != self.M:
            raise ConfigError("indicator", f"shape {self.indicator.entries.shape} does not match "
                                           f"S={self.S}, M={self.M}")
        if self.K < 1:
            raise ConfigError("K", f"must be >= 1, got {self.K}")
        if self.T < 1:
            raise ConfigError("T", f"must be >= 1, got {self.T}")
        if not self.eta_global > 0:
            raise ConfigError("eta_global", f"must be > 0, got {self.eta_global}")
        if self.eta_local < 0:
            raise ConfigError("eta_local", f"must be >= 0, got {self.eta_local}")
        if self.mode not in _MODES:
            raise ConfigError("mode", f"must be one of {_MODES}, got {self.mode!r}")
        if self.mode == "stochastic" and self.batch_size is not None and self.batch_size < 1:
            raise ConfigError("batch_size", f"must be >= 1, got {self.batch_size}")
        if self.sample_sharing not in _SHARING:
            raise ConfigError("sample_sharing",
                              f"must be one of {_SHARING}, got {self.sample_sharing!r}")
        if self.snapshot_every < 0:
            raise ConfigError("snapshot_every", f"must be >= 0, got {self.snapshot_every}")
        if self.init is not None:
            object.__setattr__(self, "init", as_model_point(self.init, self.d))
        if self.client_weights is not None:
            w = np.asarray(self.client_weights, dtype=np.float64)
            if w.shape != (self.M,) or (w <= 0).any():
                raise ConfigError("client_weights", "must be M positive values")
            object.__setattr__(self, "client_weights", w)

    def initial_point(self) -> np.ndarray:
        return np.zeros(self.d) if self.init is None else self.init.copy()

    def to_dict(self) -> dict:
        """Canonical key-value form of this config (echoed into summaries)."""
        out = {
            "name": self.name,
            "M": self.M,
            "S": self.S,
            "d": self.d,
            "indicator": [[int(v) for v in row] for row in self.indicator.entries],
            "K": self.K,
            "T": self.T,
            "eta_global": float(self.eta_global),
            "eta_local": float(self.eta_local),
            "mode": self.mode,
            "batch_size": self.batch_size,
            "seed": self.seed,
            "sample_sharing": self.sample_sharing,
            "normalize_delta_by_K": self.normalize_delta_by_K,
            "init": None if self.init is None else [float(v) for v in self.init],
            "snapshot_every": self.snapshot_every,
            "client_weights": (None if self.client_weights is None
                               else [float(v) for v in self.client_weights]),
            "problem": (None if self.problem is None
                        else {"kind": self.problem.kind, **self.problem.params}),
        }
        return out


@dataclass(frozen=True)
class RoundRecord:
    """Telemetry for one communication round, measured at the round's start point.

    ``d_norm_sq`` is the squared norm of the server direction built from
    accumulated client updates; ``dbar_norm_sq`` applies the same weights to
    the true full gradients and is the stationarity metric for non-convex
    runs.  ``delta_q`` is the weighted optimality gap, present only when the
    problem provides a closed-form scalarization minimizer.
    """

    t: int
    weights: np.ndarray
    d_norm_sq: float
    dbar_norm_sq: float
    losses: np.ndarray
    delta_q: float | None = None
    fw_gap: float = 0.0
    lambda_drift: float | None = None
    x_snapshot: np.ndarray | None = None

    def __post_init__(self):
        if self.d_norm_sq < 0 or self.dbar_norm_sq < 0:
            raise ValueError("squared norms must be nonnegative")
        if self.delta_q is not None and self.delta_q < 0:
            raise ValueError(f"delta_q must be nonnegative, got {self.delta_q}")
