"""Command-line entry point: ``gradctl run``, ``gradctl fig`` and ``gradctl verify``.

Run configurations are flat ``key = value`` files (``#`` starts a comment).
Recognised keys and their defaults are listed in ``DEFAULTS``; ``preset``
selects one of ``PRESETS`` as the starting point.
"""
from __future__ import annotations

import argparse
import logging
import sys
from pathlib import Path

import numpy as np

from . import experiments
from .controllers import saturated_linear
from .features import logcosh_basis, monomial_basis, sample_feature_matrix
from .learners import METHODS, TrainingConfig, best_report, run_policy_iteration
from .plants import PROBLEMS, ClosedLoopSystem
from .rollout import SCHEMES, DivergenceError, IntegrationConfig, integrate_closed_loop

log = logging.getLogger("gradctl")

DEFAULTS = {
    "problem": "oscillator_5_1",
    "method": "direct_grad_g",
    "basis": "monomial",
    "order": "8",
    "features": "30",
    "scale": "10.0",
    "step": "0.1",
    "horizon": "40.0",
    "loss_floor": "1e-06",
    "scheme": "ssp3",
    "rounds": "5",
    "sweeps_per_round": "100",
    "box": "1.0",
    "warp": "sine",
    "ghjb_warp": "uniform",
    "ghjb_samples": "40000",
    "ridge": "0.0",
    "seed": "0",
    "out": "gradctl-run",
}

PRESETS = {
    "ak2005_ex52": {"problem": "oscillator_5_1", "basis": "monomial", "order": "8", "step": "0.1",
                    "box": "1.0", "rounds": "5"},
    "ak2004_ex53": {"problem": "integrator_5_2", "basis": "logcosh", "features": "30", "scale": "10.0",
                    "step": "0.02", "box": "0.5", "rounds": "19"},
}


class ConfigError(ValueError):
    pass


def parse_config_text(text: str) -> dict:
    """Resolve a flat config into a complete key -> string mapping."""
    raw = {}
    for lineno, line in enumerate(text.splitlines(), 1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"line {lineno}: expected 'key = value'")
        key, value = (part.strip() for part in line.split("=", 1))
        if key != "preset" and key not in DEFAULTS:
            raise ConfigError(f"line {lineno}: unknown key {key!r}")
        raw[key] = value
    cfg = dict(DEFAULTS)
    preset = raw.pop("preset", None)
    if preset is not None:
        if preset not in PRESETS:
            raise ConfigError(f"unknown preset {preset!r}; choose from {sorted(PRESETS)}")
        cfg.update(PRESETS[preset])
    cfg.update(raw)
    validate_config(cfg)
    return cfg


def validate_config(cfg: dict) -> None:
    if cfg["problem"] not in PROBLEMS:
        raise ConfigError(f"unknown problem {cfg['problem']!r}")
    if cfg["method"] not in METHODS:
        raise ConfigError(f"unknown method {cfg['method']!r}")
    if cfg["basis"] not in ("monomial", "logcosh"):
        raise ConfigError(f"unknown basis {cfg['basis']!r}")
    if cfg["scheme"] not in SCHEMES:
        raise ConfigError(f"unknown scheme {cfg['scheme']!r}")
    try:
        for key in ("order", "features", "rounds", "sweeps_per_round", "ghjb_samples", "seed"):
            int(cfg[key])
        for key in ("scale", "step", "horizon", "loss_floor", "box", "ridge"):
            float(cfg[key])
    except ValueError as exc:
        raise ConfigError(str(exc)) from None


def format_config(cfg: dict) -> str:
    """Canonical text form; parsing it yields ``cfg`` again."""
    return "".join(f"{k} = {cfg[k]}\n" for k in DEFAULTS)


def execute_run(cfg: dict) -> Path:
    """Run policy iteration as configured and write the artifacts."""
    out = Path(cfg["out"])
    out.mkdir(parents=True, exist_ok=True)
    integration = IntegrationConfig(step=float(cfg["step"]), horizon=float(cfg["horizon"]),
                                    loss_floor=float(cfg["loss_floor"]), scheme=cfg["scheme"])
    problem = PROBLEMS[cfg["problem"]]()
    seed = int(cfg["seed"])
    W = None
    if cfg["basis"] == "monomial":
        basis = monomial_basis(int(cfg["order"]))
    else:
        rng = np.random.default_rng(experiments.stable_seed(seed, "W"))
        W = sample_feature_matrix(int(cfg["features"]), problem.plant.nx, float(cfg["scale"]), rng)
        basis = logcosh_basis(W)
    training = TrainingConfig(method=cfg["method"], rounds=int(cfg["rounds"]),
                              sweeps_per_round=int(cfg["sweeps_per_round"]),
                              training_box_halfwidth=float(cfg["box"]), sample_warp=cfg["warp"],
                              ghjb_sample_warp=cfg["ghjb_warp"], ghjb_samples=int(cfg["ghjb_samples"]),
                              seed=seed, ridge=float(cfg["ridge"]))
    reports = run_policy_iteration(problem, basis, problem.initial_controller(), training,
                                   integration, keep_controllers=True)
    experiments.save_run_artifacts(out, problem, basis, reports, W)
    (out / "trajectories").mkdir(exist_ok=True)
    picks = {"initial": reports[0], "best": best_report(reports), "final": reports[-1]}
    for name, rep in picks.items():
        sys_ = ClosedLoopSystem(problem.plant, problem.loss, rep.controller)
        try:
            integrate_closed_loop(sys_, problem.test_states[0], integration).to_csv(
                out / "trajectories" / f"{name}.csv")
        except DivergenceError:
            log.warning("%s controller diverges on the test movement; no trajectory written", name)
    (out / "config.txt").write_text(format_config(cfg))
    experiments.write_manifest(out, command="run", config=cfg,
                               rounds_shown={k: v.round for k, v in picks.items()})
    return out


def cmd_run(args) -> int:
    try:
        text = Path(args.config).read_text()
    except OSError as exc:
        print(f"gradctl run: cannot read config: {exc}", file=sys.stderr)
        return 2
    try:
        cfg = parse_config_text(text)
        if args.seed is not None:
            cfg["seed"] = str(args.seed)
        if args.out is not None:
            cfg["out"] = args.out
        for key in ("method", "rounds"):
            if getattr(args, key, None) is not None:
                cfg[key] = str(getattr(args, key))
        validate_config(cfg)
    except ConfigError as exc:
        print(f"gradctl run: invalid config: {exc}", file=sys.stderr)
        return 2
    out = execute_run(cfg)
    print(f"wrote {out}")
    return 0


def cmd_fig(args) -> int:
    out = Path(args.out or f"gradctl-{args.figure}")
    seed = args.seed or 0
    if args.figure == "fig2":
        rows = experiments.reproduce_fig2(args.method or "direct", args.order or 8, args.rounds or 5, seed, out)
        for rnd, cost in rows:
            print(f"round {rnd:2d}  test cost {cost:.4f}")
    elif args.figure == "fig3":
        _, rounds = experiments.reproduce_fig3(args.method or "ghjb", args.order or 8, seed,
                                               args.rounds or 5, out)
        print(f"trajectories for rounds {rounds}")
    elif args.figure == "fig4":
        if args.features:
            counts = [int(c) for c in args.features.split(",")]
        else:
            counts = experiments.FIG4_QUICK_COUNTS if args.quick else experiments.FIG4_FULL_COUNTS
        runs = args.runs or (5 if args.quick else 10)
        _, summary, ref = experiments.reproduce_fig4(counts, runs, args.rounds or 19, seed, out_dir=out)
        print(f"reference cost {ref:.4f}")
        for (n, m), med in summary.items():
            print(f"{n:4d} features  {m:6s}  median {med:.4f}  ({100 * (med / ref - 1):+.2f}%)")
    elif args.figure == "field":
        problem = experiments.oscillator_problem()
        out.mkdir(parents=True, exist_ok=True)
        controller = saturated_linear(problem.initial_gain)
        experiments.export_gradient_field(controller, problem, args.grid, out_path=out / "field.csv")
    print(f"wrote {out}")
    return 0


def cmd_verify(args) -> int:
    from .checks import format_table, run_checks
    results = run_checks()
    print(format_table(results))
    return 0 if all(r.passed for r in results) else 1


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="gradctl", description=__doc__.splitlines()[0])
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("run", help="policy iteration from a config file")
    p.add_argument("--config", required=True)
    p.add_argument("--seed", type=int)
    p.add_argument("--out")
    p.add_argument("--method", choices=METHODS)
    p.add_argument("--rounds", type=int)
    p.set_defaults(func=cmd_run)

    p = sub.add_parser("fig", help="reproduce a benchmark figure as CSV")
    p.add_argument("figure", choices=("fig2", "fig3", "fig4", "field"))
    p.add_argument("--method", choices=sorted(experiments.METHOD_ALIASES))
    p.add_argument("--order", type=int, choices=(6, 8))
    p.add_argument("--features", help="comma-separated feature counts (fig4)")
    p.add_argument("--runs", type=int)
    p.add_argument("--rounds", type=int)
    p.add_argument("--seed", type=int)
    p.add_argument("--grid", type=int, default=15)
    p.add_argument("--quick", action="store_true", help="desk-scale fig4 grid")
    p.add_argument("--out")
    p.set_defaults(func=cmd_fig)

    p = sub.add_parser("verify", help="run the numerical property checks")
    p.set_defaults(func=cmd_verify)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
