"""Numerical self-checks behind ``gradctl verify``.

Each check returns a :class:`CheckResult`; :func:`run_checks` runs them all.
Benchmark problems are injectable so that a deliberately broken model can
be shown to fail.
"""
from __future__ import annotations

import time
from dataclasses import dataclass

import numpy as np

from .controllers import ZeroController, improved_controller
from .experiments import FEATURE_SCALE
from .features import MonomialBasis, logcosh_basis, monomial_basis, sample_feature_matrix
from .gradient_sweep import ghjb_project, sweep_batch
from .learners import TrainingConfig, fit_direct, fit_ghjb, run_policy_iteration
from .plants import ClosedLoopSystem, QuadraticLoss, integrator_problem, make_linear_plant, oscillator_problem
from .rollout import IntegrationConfig, total_costs

JACOBIAN_TOL = 1e-5
ORACLE_TOL = 1e-3
SWEEP_FD_TOL = 0.02
# The discrete cost is only piecewise smooth near the saturation kink, so the
# sweep is compared at a fine step against a finer finite-difference oracle.
SWEEP_STEP = 0.01
ORACLE_STEP = 0.0025
ORACLE_DELTA = 1e-3


@dataclass
class CheckResult:
    name: str
    passed: bool
    detail: str
    seconds: float = 0.0


def fd_jacobian(fn, X, delta=1e-6):
    """Central differences of a batched map; output gains a trailing ``nx`` axis."""
    X = np.asarray(X, dtype=float)
    cols = []
    for j in range(X.shape[1]):
        e = np.zeros(X.shape[1])
        e[j] = delta
        cols.append((np.asarray(fn(X + e)) - np.asarray(fn(X - e))) / (2 * delta))
    return np.stack(cols, axis=-1)


def relative_error(analytic, numeric) -> float:
    analytic, numeric = np.asarray(analytic), np.asarray(numeric)
    return float(np.max(np.abs(analytic - numeric)) / max(np.max(np.abs(numeric)), 1.0))


def benchmark_problems():
    return [oscillator_problem(), integrator_problem()]


def _jacobian_pairs(problem, rng):
    """``(label, analytic, numeric)`` triples for every model derivative of ``problem``."""
    plant, loss = problem.plant, problem.loss
    b = problem.box_halfwidth
    X = rng.uniform(-b, b, size=(40, plant.nx))
    # keep the saturated initial law away from its kink
    K = problem.initial_gain
    margin = np.abs(np.abs(X @ K) - 1.0) > 1e-3
    Xs = X[margin]
    U = rng.uniform(-0.9, 0.9, size=(len(X), plant.nu))
    pairs = [
        ("drift", plant.drift_jacobian(X), fd_jacobian(plant.drift, X)),
        ("input matrix", plant.input_matrix_jacobian(X), fd_jacobian(plant.input_matrix, X)),
        ("loss dstate", loss.dstate(X, U), fd_jacobian(lambda Z: loss.rate(Z, U), X)),
        ("loss dcommand", loss.dcommand(X, U), fd_jacobian(lambda V: loss.rate(X, V), U)),
        ("argmin", loss.argmin_jacobian(U), fd_jacobian(loss.argmin_command, U)),
    ]
    basis = monomial_basis(4) if problem.name.startswith("osc") else logcosh_basis(
        sample_feature_matrix(8, plant.nx, FEATURE_SCALE, rng))
    pairs += [
        ("basis gradient", basis.jacobian(X), fd_jacobian(basis.eval, X)),
        ("basis hessian", basis.hessian(X), fd_jacobian(basis.jacobian, X)),
    ]
    initial = problem.initial_controller()
    learned = improved_controller(rng.normal(scale=0.3, size=basis.nf), basis, plant, loss)
    for label, ctrl, pts in (("initial law", initial, Xs), ("learned law", learned, X)):
        sys = ClosedLoopSystem(plant, loss, ctrl)
        pairs += [
            (f"{label} du/dx", ctrl.jacobian(pts), fd_jacobian(ctrl.eval, pts)),
            (f"{label} dF/dx", sys.velocity_jacobian(pts), fd_jacobian(sys.velocity, pts)),
            (f"{label} dL/dx", sys.loss_gradient(pts), fd_jacobian(sys.loss_rate, pts)),
        ]
    return pairs


def check_jacobians(problems, seed=0) -> CheckResult:
    rng = np.random.default_rng(seed)
    worst, where = 0.0, ""
    for problem in problems:
        for label, a, n in _jacobian_pairs(problem, rng):
            err = relative_error(a, n)
            if not err <= worst:
                worst, where = err, f"{problem.name}: {label}"
    return CheckResult("analytic Jacobians vs central differences", worst < JACOBIAN_TOL,
                       f"max rel err {worst:.2e} ({where})")


def _scalar_oracle():
    """``xdot = -x + u`` with ``u = 0`` and ``L = x^2``: ``J = x^2/2``, ``gradJ = x``."""
    plant = make_linear_plant([[-1.0]], [[1.0]])
    return ClosedLoopSystem(plant, QuadraticLoss([[1.0]], [[1.0]]), ZeroController(1))


def check_scalar_oracle() -> CheckResult:
    sys = _scalar_oracle()
    cfg = IntegrationConfig()
    x0 = np.array([[1.0], [-0.5], [0.8]])
    cost_err = np.max(np.abs(total_costs(sys, x0, cfg) - 0.5 * x0[:, 0] ** 2))
    grad_err = max(np.max(np.abs(r.grads - r.states)) for r in sweep_batch(sys, x0, cfg))
    basis = MonomialBasis([[2]])
    rng = np.random.default_rng(0)
    tcfg = TrainingConfig(method="ghjb", ghjb_samples=500, sweeps_per_round=10)
    w_ghjb = fit_ghjb(sys, basis, tcfg, rng)[0][0]
    w_direct = fit_direct(sys, basis, TrainingConfig(method="direct_grad", sweeps_per_round=10), rng, cfg)[0][0]
    errs = [cost_err, grad_err, abs(w_ghjb - 0.5), abs(w_direct - 0.5)]
    return CheckResult("scalar oracle: cost, gradient, fitted weights", max(errs) < ORACLE_TOL,
                       "cost {:.1e}, grad {:.1e}, ghjb w {:.1e}, direct w {:.1e}".format(*errs))


def check_projection(seed=0) -> CheckResult:
    rng = np.random.default_rng(seed)
    g = rng.normal(size=(500, 3))
    v = rng.normal(size=(500, 3))
    L = rng.uniform(0.0, 2.0, size=500)
    p = ghjb_project(g, v, L)
    identity = np.max(np.abs(np.sum(p * v, axis=1) + L))
    idempotence = np.max(np.abs(ghjb_project(p, v, L) - p))
    # any other feasible point: p + (component orthogonal to v)
    t = rng.normal(size=(500, 3))
    t -= (np.sum(t * v, axis=1) / np.sum(v * v, axis=1))[:, None] * v
    slack = np.min(np.linalg.norm(p + t - g, axis=1) - np.linalg.norm(p - g, axis=1))
    ok = identity < 1e-10 and idempotence < 1e-10 and slack >= -1e-12
    return CheckResult("projection identity, idempotence, minimality", ok,
                       f"identity {identity:.1e}, idempotence {idempotence:.1e}, min slack {slack:.1e}")


def check_sweep_vs_rollouts(n_points: int = 40, seed=1) -> CheckResult:
    problem = oscillator_problem()
    sys = ClosedLoopSystem(problem.plant, problem.loss, problem.initial_controller())
    rng = np.random.default_rng(seed)
    X0 = problem.box_halfwidth * np.sin(0.5 * np.pi * rng.uniform(-1, 1, size=(10, 2)))
    results = sweep_batch(sys, X0, IntegrationConfig(step=SWEEP_STEP))
    P = np.concatenate([r.states for r in results])
    G = np.concatenate([r.grads for r in results])
    keep = np.linalg.norm(P, axis=1) > 0.2
    P, G = P[keep], G[keep]
    pick = np.linspace(0, len(P) - 1, n_points).astype(int)
    P, G = P[pick], G[pick]
    oracle = IntegrationConfig(step=ORACLE_STEP)
    fd = fd_jacobian(lambda Z: total_costs(sys, Z, oracle), P, ORACLE_DELTA)
    err = np.linalg.norm(G - fd, axis=1) / np.linalg.norm(fd, axis=1)
    return CheckResult("sweep gradient vs differenced rollouts", float(err.max()) < SWEEP_FD_TOL,
                       f"max rel err {err.max():.2%} over {len(P)} states with |x| > 0.2")


def _one_round(problem, basis, method="direct_grad_g", seed=0):
    cfg = TrainingConfig(method=method, rounds=1, seed=seed, training_box_halfwidth=problem.box_halfwidth)
    return run_policy_iteration(problem, basis, problem.initial_controller(), cfg)


def check_improvement() -> CheckResult:
    parts, ok = [], True
    osc = oscillator_problem()
    integ = integrator_problem()
    W = sample_feature_matrix(30, 2, FEATURE_SCALE, np.random.default_rng(0))
    for problem, basis in ((osc, monomial_basis(8)), (integ, logcosh_basis(W))):
        before, after = _one_round(problem, basis)
        ok &= after.test_cost < before.test_cost
        parts.append(f"{problem.name} {before.test_cost:.3f} -> {after.test_cost:.3f}")
    return CheckResult("first round improves the test cost", bool(ok), "; ".join(parts))


def check_determinism() -> CheckResult:
    problem = oscillator_problem()
    a = _one_round(problem, monomial_basis(6), seed=7)
    b = _one_round(problem, monomial_basis(6), seed=7)
    same = all(x.weights.tobytes() == y.weights.tobytes() and x.test_cost == y.test_cost
               for x, y in zip(a, b))
    return CheckResult("repeated seeded run is bit-identical", same,
                       "weights and costs identical" if same else "runs differ")


def run_checks(problems=None) -> list[CheckResult]:
    problems = benchmark_problems() if problems is None else problems
    steps = [lambda: check_jacobians(problems), check_scalar_oracle, check_projection,
             check_sweep_vs_rollouts, check_improvement, check_determinism]
    results = []
    for step in steps:
        t0 = time.perf_counter()
        try:
            res = step()
        except Exception as exc:  # a crashing check is a failing check
            res = CheckResult(getattr(step, "__name__", "check"), False, f"{type(exc).__name__}: {exc}")
        res.seconds = time.perf_counter() - t0
        results.append(res)
    return results


def format_table(results) -> str:
    width = max(len(r.name) for r in results)
    lines = [f"{'check':<{width}}  result  time    detail"]
    for r in results:
        lines.append(f"{r.name:<{width}}  {'PASS' if r.passed else 'FAIL':<6}  {r.seconds:5.1f}s  {r.detail}")
    lines.append(f"{sum(r.passed for r in results)}/{len(results)} checks passed")
    return "\n".join(lines)
