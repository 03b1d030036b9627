"""Built-in verification battery behind the ``verify`` subcommand.

Every check is independent of the code path it validates: the min-norm solver
is measured against the brute-force lattice oracle, gradients against central
finite differences, stochastic gradients against Monte Carlo means, and the
round engine against directly coded centralized references.  Failures report
the instance seed so a failing case can be replayed in isolation.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .core import ExperimentConfig, IndicatorMatrix
from .federation import descent_step_limit, run_experiment
from .minnorm import closed_form_two, grid_oracle, solve_min_norm
from .problems import quadratic_suite, synthetic_classification_suite, toy_nonconvex_suite

__all__ = ["CheckResult", "run_battery", "mgd_reference"]


@dataclass(frozen=True)
class CheckResult:
    name: str
    passed: bool
    detail: str
    seed: int | None = None

    def line(self) -> str:
        status = "PASS" if self.passed else "FAIL"
        tail = f" [seed {self.seed}]" if (not self.passed and self.seed is not None) else ""
        return f"{status}  {self.name}: {self.detail}{tail}"


def mgd_reference(problem, x0, eta, rounds, tol=1e-10):
    """Directly coded centralized multi-gradient descent.

    Per round: solve the min-norm weighting of the true full gradients and
    step the model along the combined direction.  Returns the (rounds+1, d)
    array of iterates starting at x0.  This is the reduction target for the
    federated engine with one client and one local step.
    """
    x = np.asarray(x0, dtype=np.float64).copy()
    iterates = [x.copy()]
    for _ in range(rounds):
        sol = solve_min_norm(problem.gradient_matrix(x), tol=tol)
        x = x - eta * sol.direction
        iterates.append(x.copy())
    return np.vstack(iterates)


def check_minnorm_oracle(n_instances=200, seed=20240, solver=solve_min_norm,
                         tol_excess=1e-4, gap_tol=1e-8) -> CheckResult:
    """Solver vs lattice oracle on random instances; also certifies fw_gap."""
    failures = []
    for case in range(n_instances):
        rng = np.random.default_rng([seed, case])
        S = int(rng.integers(2, 4))
        d = int(rng.integers(2, 6))
        G = rng.uniform(-1.0, 1.0, (S, d))
        sol = solver(G)
        _, oracle_nsq = grid_oracle(G, 1e-2, refine_to=1e-3)
        if sol.norm_sq > oracle_nsq + tol_excess:
            failures.append((case, f"norm_sq {sol.norm_sq} > oracle {oracle_nsq}"))
        elif sol.converged and sol.fw_gap > gap_tol:
            failures.append((case, f"converged but fw_gap {sol.fw_gap} > {gap_tol}"))
    if failures:
        case, why = failures[0]
        return CheckResult("minnorm-vs-oracle", False,
                           f"{len(failures)}/{n_instances} instances failed; first: {why}",
                           seed=case)
    return CheckResult("minnorm-vs-oracle", True, f"{n_instances} instances within bounds")


def check_closed_form(n_pairs=100, seed=20241, solver=solve_min_norm,
                      atol=1e-8) -> CheckResult:
    for case in range(n_pairs):
        rng = np.random.default_rng([seed, case])
        g1, g2 = rng.standard_normal((2, 5))
        direct = closed_form_two(g1, g2)
        iterative = solver(np.vstack([g1, g2]))
        if abs(direct.norm_sq - iterative.norm_sq) > atol:
            return CheckResult("closed-form-two", False,
                               f"norm_sq mismatch {direct.norm_sq} vs {iterative.norm_sq}",
                               seed=case)
    return CheckResult("closed-form-two", True, f"{n_pairs} pairs agree to {atol}")


def _fd_gradient(fn, x, h=1e-6):
    g = np.zeros_like(x)
    for j in range(x.shape[0]):
        e = np.zeros_like(x)
        e[j] = h
        g[j] = (fn(x + e) - fn(x - e)) / (2.0 * h)
    return g


def _sample_problems(seed):
    A = IndicatorMatrix(np.array([[1, 1, 0], [0, 1, 1]]))
    quad = quadratic_suite(4, 2, np.array([[1.0, 0, 0, 0], [0, 1.0, 0, 0]]), 1.3, 3, A,
                           heterogeneity=0.4, curvature_spread=0.3, n_per_client=16,
                           seed=seed)
    tanh = toy_nonconvex_suite(4, 2, 3, A, seed, n_terms=5, heterogeneity=0.3,
                               n_per_client=24)
    cls = synthetic_classification_suite(8, 2, 3, A, 30, ("label_skew", 4), seed,
                                         n_components=6, task_overlap=0.25)
    return [quad, tanh, cls]


def check_gradients(seed=20242, n_points=50, rel_tol=1e-5) -> CheckResult:
    """Analytic per-shard gradients vs central finite differences."""
    worst = 0.0
    for problem in _sample_problems(seed):
        rng = np.random.default_rng([seed, 99])
        for _ in range(n_points):
            s = int(rng.integers(problem.S))
            owners = problem.indicator.owner_sets[s]
            i = int(owners[rng.integers(len(owners))])
            x = rng.standard_normal(problem.d)
            fd = _fd_gradient(lambda z: problem.loss(s, i, z), x)
            an = problem.grad(s, i, x)
            scale = max(np.linalg.norm(fd), 1e-8)
            rel = float(np.linalg.norm(an - fd) / scale)
            worst = max(worst, rel)
            if rel > rel_tol:
                return CheckResult("gradient-finite-diff", False,
                                   f"{problem.name} rel err {rel:.2e} at objective {s}, "
                                   f"client {i}", seed=seed)
    return CheckResult("gradient-finite-diff", True, f"worst rel err {worst:.2e}")


def check_unbiasedness(n_samples=10_000, seed=20243, batch=8) -> CheckResult:
    """Monte Carlo mean of minibatch gradients within 3 SE of the exact gradient."""
    for problem in _sample_problems(seed):
        rng = np.random.default_rng([seed, 7])
        x = rng.standard_normal(problem.d)
        s, i = 0, int(problem.indicator.owner_sets[0][0])
        n_shard = problem.shard_size(i)
        draws = np.empty((n_samples, problem.d))
        for r in range(n_samples):
            idx = rng.integers(0, n_shard, batch)
            draws[r] = problem.stoch_grad(s, i, x, idx)
        exact = problem.grad(s, i, x)
        se = draws.std(axis=0, ddof=1) / np.sqrt(n_samples)
        off = np.abs(draws.mean(axis=0) - exact)
        if (off > 3.0 * se + 1e-12).any():
            j = int(np.argmax(off - 3.0 * se))
            return CheckResult("stochastic-unbiasedness", False,
                               f"{problem.name} coord {j}: |mean-exact|={off[j]:.3e} "
                               f"> 3*SE={3 * se[j]:.3e}", seed=seed)
    return CheckResult("stochastic-unbiasedness", True,
                       f"{n_samples} draws within 3 SE on all suites")


def check_mgd_reduction(rounds=50, seed=20244, solver_tol=1e-10) -> CheckResult:
    """Engine with M=1, K=1, full gradients is bit-identical to direct MGD."""
    A = IndicatorMatrix.all_ones(2, 1)
    centers = np.array([[1.0, 0.0, 0.5], [0.0, 1.0, -0.5]])
    problem = quadratic_suite(3, 2, centers, 1.0, 1, A, seed=seed)
    config = ExperimentConfig(M=1, S=2, indicator=A, d=3, K=1, T=rounds,
                              eta_global=0.5, eta_local=0.1, seed=seed,
                              snapshot_every=1)
    traj = run_experiment(config, problem, minnorm_tol=solver_tol)
    fed = np.vstack([rec.x_snapshot for rec in traj.records] + [traj.final_point])
    ref = mgd_reference(problem, np.zeros(3), 0.5, rounds, tol=solver_tol)
    if fed.shape != ref.shape or not np.array_equal(fed, ref):
        worst = float(np.abs(fed - ref).max()) if fed.shape == ref.shape else float("nan")
        return CheckResult("mgd-reduction", False,
                           f"trajectories differ (max abs diff {worst})", seed=seed)
    return CheckResult("mgd-reduction", True, f"{rounds} rounds bit-identical")


def check_descent(rounds=100, seed=20245, slack=1e-12) -> CheckResult:
    """Every objective non-increasing per round at the guaranteed step size."""
    A = IndicatorMatrix.all_ones(2, 1)
    suites = [
        quadratic_suite(3, 2, np.array([[1.0, 0, 0], [0, 1.0, 0]]), 1.0, 1, A, seed=seed),
        toy_nonconvex_suite(3, 2, 1, A, seed, n_terms=5),
    ]
    for problem in suites:
        eta = descent_step_limit(problem.smoothness)
        config = ExperimentConfig(M=1, S=2, indicator=A, d=3, K=1, T=rounds,
                                  eta_global=eta, eta_local=0.0, seed=seed)
        traj = run_experiment(config, problem)
        losses = np.vstack([rec.losses for rec in traj.records]
                           + [problem.losses(traj.final_point)])
        increase = np.diff(losses, axis=0).max()
        if increase > slack:
            return CheckResult("common-descent", False,
                               f"{problem.name}: loss increased by {increase:.3e}",
                               seed=seed)
    return CheckResult("common-descent", True,
                       f"all objectives non-increasing over {rounds} rounds")


def run_battery(level="quick", solver=solve_min_norm) -> list[CheckResult]:
    """Run the verification suite; ``full`` widens the Monte Carlo checks."""
    if level not in ("quick", "full"):
        raise ValueError(f"level must be 'quick' or 'full', got {level!r}")
    mc = 10_000 if level == "full" else 2_000
    return [
        check_minnorm_oracle(solver=solver),
        check_closed_form(solver=solver),
        check_gradients(),
        check_unbiasedness(n_samples=mc),
        check_mgd_reduction(),
        check_descent(rounds=200 if level == "full" else 100),
    ]
