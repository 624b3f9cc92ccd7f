"""Scripted benchmark studies that write plot-ready CSV files.

* ``reproduce_fig2``: test cost per round on the oscillator with monomial features.
* ``reproduce_fig3``: test-movement trajectories of the initial, best and final laws.
* ``reproduce_fig4``: best-in-run cost against the number of random log-cosh features.
* ``export_gradient_field``: swept cost-to-go gradients on a grid.

Every function is a pure function of its arguments and seeds.
"""
from __future__ import annotations

import csv
import json
import os
import zlib
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass
from pathlib import Path

import numpy as np

from . import __version__
from .features import logcosh_basis, monomial_basis, sample_feature_matrix, save_matrix_csv
from .gradient_sweep import sweep_batch
from .learners import TrainingConfig, best_report, run_policy_iteration, write_rounds_csv
from .plants import ClosedLoopSystem, integrator_problem, oscillator_problem
from .rollout import DivergenceError, integrate_closed_loop

#: Experiment method names mapped onto learner objectives.
METHOD_ALIASES = {"ghjb": "ghjb", "direct": "direct_grad_g", "direct_grad": "direct_grad",
                  "direct_grad_g": "direct_grad_g"}

FIG4_QUICK_COUNTS = (5, 30, 100)
FIG4_FULL_COUNTS = (5, 10, 20, 30, 50, 100, 200, 300)
#: Random log-cosh rows are uniform on [-FEATURE_SCALE, FEATURE_SCALE].
FEATURE_SCALE = 10.0


def _method(name: str) -> str:
    try:
        return METHOD_ALIASES[name]
    except KeyError:
        raise ValueError(f"unknown method {name!r}; choose from {sorted(METHOD_ALIASES)}") from None


def stable_seed(base_seed: int, *key) -> int:
    """``base_seed`` offset by a CRC of ``key``; identical across processes and runs."""
    return int(base_seed) + zlib.crc32(":".join(map(str, key)).encode()) % (2 ** 31)


def worker_count(requested: int | None = None) -> int:
    cap = int(os.environ.get("GRADCTL_THREADS", "0") or 0)
    n = requested or cap or 1
    if cap:
        n = min(n, cap)
    return max(1, n)


def write_manifest(out_dir, **fields) -> Path:
    path = Path(out_dir) / "manifest.json"
    payload = {"library_version": __version__, **fields}
    path.write_text(json.dumps(payload, indent=2, sort_keys=True, default=_jsonable) + "\n")
    return path


def _jsonable(obj):
    if isinstance(obj, np.ndarray):
        return obj.tolist()
    if isinstance(obj, (np.integer, np.floating)):
        return obj.item()
    raise TypeError(f"cannot serialise {type(obj).__name__}")


# --- oscillator: rounds and trajectories ------------------------------------

def _oscillator_run(method, max_order, rounds, seed, keep_controllers=False):
    problem = oscillator_problem()
    basis = monomial_basis(max_order)
    cfg = TrainingConfig(method=_method(method), rounds=rounds, seed=seed,
                         training_box_halfwidth=problem.box_halfwidth)
    reports = run_policy_iteration(problem, basis, problem.initial_controller(), cfg,
                                   keep_controllers=keep_controllers)
    return problem, reports


def reproduce_fig2(method: str, max_order: int = 8, rounds: int = 5, seed: int = 0, out_dir=None):
    """Per-round test costs; returns ``[(round, cost), ...]`` and writes ``fig2_<method>_<order>.csv``."""
    _, reports = _oscillator_run(method, max_order, rounds, seed)
    rows = [(r.round, r.test_cost) for r in reports]
    if out_dir is not None:
        out = Path(out_dir)
        out.mkdir(parents=True, exist_ok=True)
        with open(out / f"fig2_{method}_{max_order}.csv", "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(["round", "test_cost"])
            for rnd, cost in rows:
                writer.writerow([rnd, repr(float(cost))])
        write_manifest(out, figure="fig2", method=method, max_order=max_order, rounds=rounds, seed=seed)
    return rows


def reproduce_fig3(method: str, max_order: int = 8, seed: int = 0, rounds: int = 5, out_dir=None):
    """Replay the initial, best and final laws from the test state.

    Returns ``{"initial": Trajectory, "best": ..., "final": ...}`` together
    with the round numbers of best and final.
    """
    problem, reports = _oscillator_run(method, max_order, rounds, seed, keep_controllers=True)
    best = best_report(reports[1:]) if len(reports) > 1 else reports[0]
    picks = {"initial": reports[0], "best": best, "final": reports[-1]}
    x0 = problem.test_states[0]
    trajectories = {}
    for name, rep in picks.items():
        sys = ClosedLoopSystem(problem.plant, problem.loss, rep.controller)
        try:
            trajectories[name] = integrate_closed_loop(sys, x0, problem.integration)
        except DivergenceError:
            trajectories[name] = None
    if out_dir is not None:
        out = Path(out_dir)
        out.mkdir(parents=True, exist_ok=True)
        for name, traj in trajectories.items():
            if traj is not None:
                traj.to_csv(out / f"fig3_{method}_{max_order}_{name}.csv")
        write_manifest(out, figure="fig3", method=method, max_order=max_order, rounds=rounds, seed=seed,
                       rounds_shown={k: v.round for k, v in picks.items()})
    return trajectories, {k: v.round for k, v in picks.items()}


# --- random-feature sweep ---------------------------------------------------

@dataclass(frozen=True)
class SweepRecord:
    feature_count: int
    run_index: int
    method: str
    best_cost: float
    best_round: int
    seed: int


def fig4_job(feature_count, run_index, method, rounds, base_seed, scale, sweeps_per_round=100):
    """One run: fresh feature matrix, ``rounds`` rounds, best test cost."""
    problem = integrator_problem()
    W = sample_feature_matrix(feature_count, problem.plant.nx, scale,
                              np.random.default_rng(stable_seed(base_seed, feature_count, run_index, "W")))
    seed = stable_seed(base_seed, feature_count, run_index, method)
    cfg = TrainingConfig(method=_method(method), rounds=rounds, seed=seed,
                         sweeps_per_round=sweeps_per_round,
                         training_box_halfwidth=problem.box_halfwidth)
    reports = run_policy_iteration(problem, logcosh_basis(W), problem.initial_controller(), cfg)
    # runs where nothing beats the initial law report the initial cost
    best = best_report(reports)
    return SweepRecord(feature_count, run_index, method, float(best.test_cost), best.round, seed)


def _fig4_job_star(args):
    return fig4_job(*args)


def reproduce_fig4(feature_counts=FIG4_QUICK_COUNTS, runs_per_count: int = 5, rounds: int = 19,
                   base_seed: int = 0, scale: float = FEATURE_SCALE, methods=("ghjb", "direct"),
                   out_dir=None, workers: int | None = None, sweeps_per_round: int = 100):
    """Best-in-run test costs for every (feature count, run, method).

    The reference cost is the minimum over all runs; it stands in for the
    unknown optimum. Returns ``(records, summary, reference)`` where
    ``summary`` maps ``(count, method)`` to the median best cost.
    """
    jobs = [(int(n), r, m, rounds, base_seed, scale, sweeps_per_round)
            for n in feature_counts for r in range(runs_per_count) for m in methods]
    n_workers = worker_count(workers)
    if n_workers > 1:
        with ProcessPoolExecutor(n_workers) as pool:
            records = list(pool.map(_fig4_job_star, jobs))
    else:
        records = [fig4_job(*job) for job in jobs]
    reference = min(r.best_cost for r in records)
    summary = {}
    for n in feature_counts:
        for m in methods:
            costs = [r.best_cost for r in records if r.feature_count == n and r.method == m]
            summary[(int(n), m)] = float(np.median(costs))
    if out_dir is not None:
        out = Path(out_dir)
        out.mkdir(parents=True, exist_ok=True)
        with open(out / "fig4_runs.csv", "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(["feature_count", "run_index", "method", "best_cost", "best_round", "seed"])
            for r in records:
                writer.writerow([r.feature_count, r.run_index, r.method, repr(r.best_cost), r.best_round, r.seed])
        with open(out / "fig4_summary.csv", "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(["feature_count", "method", "median_best_cost", "relative_to_reference"])
            for (n, m), med in summary.items():
                writer.writerow([n, m, repr(med), repr(med / reference - 1.0)])
        write_manifest(out, figure="fig4", feature_counts=list(map(int, feature_counts)),
                       runs_per_count=runs_per_count, rounds=rounds, base_seed=base_seed, scale=scale,
                       methods=list(methods), sweeps_per_round=sweeps_per_round,
                       reference_cost=reference,
                       reference_note="derived: minimum best cost over all runs and methods, not a true optimum",
                       records=[asdict(r) for r in records])
    return records, summary, reference


# --- gradient field ---------------------------------------------------------

def export_gradient_field(controller, problem, grid: int = 15, box: float | None = None, out_path=None):
    """Swept ``gradJ`` at each grid point with the sign of ``gradJ . G``.

    Returns an array with columns ``x1, x2, g1, g2, sign``; points whose
    sweep diverges carry NaN gradients and sign.
    """
    box = problem.box_halfwidth if box is None else box
    axis = np.linspace(-box, box, grid)
    X = np.array([(a, b) for a in axis for b in axis])
    sys = ClosedLoopSystem(problem.plant, problem.loss, controller)
    try:
        results = sweep_batch(sys, X, problem.integration)
    except DivergenceError:
        results = []
        for x in X:
            try:
                results.append(sweep_batch(sys, x[None], problem.integration)[0])
            except DivergenceError:
                results.append(None)
    rows = np.full((len(X), 5), np.nan)
    rows[:, :2] = X
    for i, res in enumerate(results):
        if res is None:
            continue
        rows[i, 2:4] = res.grads[0]
        rows[i, 4] = np.sign(res.grads_g[0, 0])
    if out_path is not None:
        with open(out_path, "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(["x1", "x2", "g1", "g2", "sign"])
            for row in rows:
                writer.writerow(["" if np.isnan(v) else repr(float(v)) for v in row])
    return rows


def save_run_artifacts(out_dir, problem, basis, reports, W=None):
    """Write ``rounds.csv``, per-round weight files and the feature matrix."""
    out = Path(out_dir)
    (out / "weights").mkdir(parents=True, exist_ok=True)
    names = []
    for rep in reports:
        name = f"weights/round_{rep.round:02d}.csv"
        save_matrix_csv(out / name, rep.weights[None])
        names.append(name)
    write_rounds_csv(out / "rounds.csv", reports, names)
    if W is not None:
        save_matrix_csv(out / "features.csv", W)
    return names
