"""Least-squares weight fitting and the policy-iteration driver.

Three objectives share one streaming normal-equation accumulator:

* ``ghjb``: fit ``w . dtheta/dt`` to ``-L`` at sampled states;
* ``direct_grad``: fit ``w . dtheta/dx`` to sweep gradients, one target per
  state component;
* ``direct_grad_g``: fit ``w . dtheta/dx . G`` to ``gradJ . G``.
"""
from __future__ import annotations

import csv
import logging
import warnings
from dataclasses import dataclass, field

import numpy as np

from .gradient_sweep import sweep_batch
from .plants import ClosedLoopSystem
from .rollout import DivergenceError, IntegrationConfig, total_costs

log = logging.getLogger(__name__)

METHODS = ("ghjb", "direct_grad", "direct_grad_g")


@dataclass
class NormalEquations:
    """Running sums ``yy = sum y y'`` and ``yr = sum r y'``."""

    yy: np.ndarray
    yr: np.ndarray
    count: int = 0

    @classmethod
    def zeros(cls, nf: int) -> "NormalEquations":
        return cls(np.zeros((nf, nf)), np.zeros(nf), 0)

    @property
    def nf(self) -> int:
        return self.yr.size


def accumulate(ne: NormalEquations, y, r) -> NormalEquations:
    """Add examples in place and return ``ne``.

    ``y`` is one regressor ``(nf,)`` or a block of columns ``(nf, k)``;
    ``r`` holds the matching ``k`` targets.
    """
    y = np.asarray(y, dtype=float)
    r = np.atleast_1d(np.asarray(r, dtype=float))
    if y.ndim == 1:
        y = y[:, None]
    if y.shape[0] != ne.nf:
        raise ValueError(f"regressor length {y.shape[0]} does not match nf={ne.nf}")
    if r.shape != (y.shape[1],):
        raise ValueError(f"{y.shape[1]} regressor columns but targets have shape {r.shape}")
    ne.yy += y @ y.T
    ne.yr += y @ r
    ne.count += y.shape[1]
    return ne


def solve_weights(ne: NormalEquations, ridge: float = 0.0) -> np.ndarray:
    """Least-squares weight row from accumulated normal equations.

    With ``ridge > 0`` solves ``(yy + ridge I) w' = yr'``; otherwise returns
    the minimum-norm solution ``yr pinv(yy)`` with singular values below
    ``nf * eps * max`` discarded.
    """
    if ne.count <= 0:
        raise ValueError("no examples accumulated")
    if not np.any(ne.yy):
        warnings.warn("normal equations are all zero; returning zero weights", RuntimeWarning)
        return np.zeros(ne.nf)
    if ridge > 0:
        return np.linalg.solve(ne.yy + ridge * np.eye(ne.nf), ne.yr)
    yy = 0.5 * (ne.yy + ne.yy.T)
    return np.linalg.pinv(yy, rcond=ne.nf * np.finfo(float).eps, hermitian=True) @ ne.yr


@dataclass(frozen=True)
class TrainingConfig:
    method: str = "direct_grad_g"
    rounds: int = 5
    sweeps_per_round: int = 100
    training_box_halfwidth: float = 1.0
    sample_warp: str = "sine"
    seed: int = 0
    ridge: float = 0.0
    ghjb_samples: int = 40_000
    ghjb_sample_warp: str = "uniform"

    def __post_init__(self):
        if self.method not in METHODS:
            raise ValueError(f"unknown method {self.method!r}; choose from {METHODS}")
        if self.rounds < 1 or self.sweeps_per_round < 1:
            raise ValueError("rounds and sweeps_per_round must be >= 1")
        if self.sample_warp not in ("sine", "uniform") or self.ghjb_sample_warp not in ("sine", "uniform"):
            raise ValueError("sample warps must be 'sine' or 'uniform'")
        if self.ghjb_samples < 1:
            raise ValueError("ghjb_samples must be >= 1")
        if self.training_box_halfwidth <= 0:
            raise ValueError("training_box_halfwidth must be positive")


@dataclass
class RoundReport:
    """Test result for controller ``u^(round)``; round 1 is the initial law."""

    round: int
    weights: np.ndarray
    test_cost: float
    diverged: bool
    samples_used: int
    controller: object = field(default=None, repr=False, compare=False)


def sample_training_states(n: int, nx: int, halfwidth: float, warp: str, rng) -> np.ndarray:
    """``n`` states in the box ``[-b, b]^nx``.

    ``sine`` draws ``s`` uniform on ``[-1, 1]`` and returns ``b sin(pi s / 2)``,
    which puts more samples near the faces of the box.
    """
    s = rng.uniform(-1.0, 1.0, size=(n, nx))
    if warp == "sine":
        return halfwidth * np.sin(0.5 * np.pi * s)
    return halfwidth * s


def fit_ghjb(sys: ClosedLoopSystem, basis, cfg: TrainingConfig, rng, integration=None):
    """Weights minimising ``sum (w . grad(theta) F + L)^2`` over sampled states.

    States are drawn directly from the training box (no rollouts), using
    ``cfg.ghjb_samples`` and ``cfg.ghjb_sample_warp``. Returns
    ``(w, samples_used)``.
    """
    n = cfg.ghjb_samples
    X = sample_training_states(n, sys.nx, cfg.training_box_halfwidth, cfg.ghjb_sample_warp, rng)
    ne = NormalEquations.zeros(basis.nf)
    chunk = 4096
    for start in range(0, n, chunk):
        Xc = X[start:start + chunk]
        F, L, _ = sys._evaluate(Xc)
        Y = np.einsum("bkj,bj->kb", basis.jacobian(Xc), F)
        accumulate(ne, Y, -L)
    return solve_weights(ne, cfg.ridge), ne.count


def fit_direct(sys: ClosedLoopSystem, basis, cfg: TrainingConfig, rng,
               integration: IntegrationConfig = IntegrationConfig()):
    """Weights fitted to sweep gradients (``direct_grad``) or their ``G`` projection.

    Returns ``(w, samples_used)``; raises :class:`DivergenceError` when a
    sweep fails.
    """
    X0 = sample_training_states(cfg.sweeps_per_round, sys.nx, cfg.training_box_halfwidth,
                                cfg.sample_warp, rng)
    ne = NormalEquations.zeros(basis.nf)
    for res in sweep_batch(sys, X0, integration):
        D = basis.jacobian(res.states)  # (T, nf, nx)
        if cfg.method == "direct_grad":
            Y = D.transpose(1, 0, 2).reshape(basis.nf, -1)
            accumulate(ne, Y, res.grads.reshape(-1))
        else:
            Gm = sys.plant.input_matrix(res.states)
            Y = np.einsum("tkj,tjm->ktm", D, Gm).reshape(basis.nf, -1)
            accumulate(ne, Y, res.grads_g.reshape(-1))
    return solve_weights(ne, cfg.ridge), ne.count


def fit(sys, basis, cfg: TrainingConfig, rng, integration: IntegrationConfig = IntegrationConfig()):
    if cfg.method == "ghjb":
        return fit_ghjb(sys, basis, cfg, rng, integration)
    return fit_direct(sys, basis, cfg, rng, integration)


def evaluate_controller(problem, controller, integration: IntegrationConfig | None = None):
    """Mean full-horizon cost over the problem's test movements; ``(cost, diverged)``."""
    integration = integration or problem.integration
    sys = ClosedLoopSystem(problem.plant, problem.loss, controller)
    try:
        costs = total_costs(sys, problem.test_states, integration)
    except DivergenceError:
        return float("inf"), True
    if not np.all(np.isfinite(costs)):
        return float("inf"), True
    return float(np.mean(costs)), False


def run_policy_iteration(problem, basis, initial, cfg: TrainingConfig,
                         integration: IntegrationConfig | None = None,
                         keep_controllers: bool = False) -> list[RoundReport]:
    """Fit, improve and test for ``cfg.rounds`` rounds.

    Returns ``cfg.rounds + 1`` reports: the initial controller first, then
    each improved one. A round whose sweeps diverge keeps the previous
    controller and is reported as diverged with infinite cost; an improved
    controller whose test movement diverges is still used for the next
    round.
    """
    integration = integration or problem.integration
    rng = np.random.default_rng(cfg.seed)
    controller = initial
    w = np.zeros(basis.nf)
    cost, diverged = evaluate_controller(problem, controller, integration)
    reports = [RoundReport(1, w.copy(), cost, diverged, 0, controller if keep_controllers else None)]
    for n in range(1, cfg.rounds + 1):
        sys = ClosedLoopSystem(problem.plant, problem.loss, controller)
        try:
            w_new, used = fit(sys, basis, cfg, rng, integration)
        except DivergenceError as exc:
            log.info("round %d: fit failed (%s)", n, exc)
            reports.append(RoundReport(n + 1, w.copy(), float("inf"), True, 0,
                                       controller if keep_controllers else None))
            continue
        w = w_new
        controller = problem.improved_controller(w, basis)
        cost, diverged = evaluate_controller(problem, controller, integration)
        log.info("round %d: test cost %.6g%s", n, cost, " (diverged)" if diverged else "")
        reports.append(RoundReport(n + 1, w.copy(), cost, diverged, used,
                                   controller if keep_controllers else None))
    return reports


def write_rounds_csv(path, reports, weight_files=None) -> None:
    """Columns ``round, test_cost, diverged, weights_file``."""
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["round", "test_cost", "diverged", "weights_file"])
        for i, rep in enumerate(reports):
            ref = weight_files[i] if weight_files else ""
            writer.writerow([rep.round, repr(float(rep.test_cost)), int(rep.diverged), ref])


def best_report(reports) -> RoundReport:
    finite = [r for r in reports if np.isfinite(r.test_cost)]
    return min(finite, key=lambda r: r.test_cost) if finite else reports[0]

