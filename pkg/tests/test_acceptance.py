"""Acceptance criteria, each run at its stated tolerance.

Every test appends one PASS/FAIL line to ``RESULTS``; the lines are printed
in the pytest terminal summary.
Report ``round`` k is controller u^(k): round 1 is the initial law.
"""
import time

import numpy as np
import pytest

from gradctl.checks import format_table, run_checks
from gradctl.experiments import FIG4_QUICK_COUNTS, reproduce_fig4
from gradctl.features import monomial_basis
from gradctl.learners import TrainingConfig, best_report, run_policy_iteration
from gradctl.plants import oscillator_problem

RESULTS = []


def record(label, ok, detail):
    RESULTS.append(f"[{'PASS' if ok else 'FAIL'}] {label}: {detail}")
    return ok


def oscillator_run(method, order, rounds=5, seed=0):
    problem = oscillator_problem()
    cfg = TrainingConfig(method=method, rounds=rounds, seed=seed, training_box_halfwidth=problem.box_halfwidth)
    t0 = time.perf_counter()
    reports = run_policy_iteration(problem, monomial_basis(order), problem.initial_controller(), cfg)
    return reports, time.perf_counter() - t0


def costs_text(reports):
    return ", ".join(f"u{r.round}={r.test_cost:.3f}" for r in reports)


def test_criterion_1_ghjb_24_features():
    reports, secs = oscillator_run("ghjb", 8)
    second, final = reports[1].test_cost, reports[-1].test_cost
    ok = 3.80 <= second <= 4.10 and 4.25 <= final <= 4.95 and secs < 120
    assert record("1 GHJB 24 features", ok,
                  f"round 2 {second:.3f} in [3.80, 4.10], final {final:.3f} in [4.25, 4.95], {secs:.0f}s < 120s"
                  f" ({costs_text(reports)})")


def test_criterion_2_direct_24_features():
    reports, secs = oscillator_run("direct_grad_g", 8)
    best = best_report(reports).test_cost
    ok = 3.60 <= best <= 3.95 and secs < 300
    assert record("2 direct 24 features", ok, f"best {best:.3f} in [3.60, 3.95], {secs:.0f}s < 300s"
                  f" ({costs_text(reports)})")


def test_criterion_3_direct_15_features():
    reports, _ = oscillator_run("direct_grad_g", 6)
    second = reports[1].test_cost
    later = np.array([r.test_cost for r in reports[2:5]])
    spread = float(np.max(np.abs(later / second - 1.0)))
    best = best_report(reports).test_cost
    ok = spread <= 0.05 and best <= 4.1
    assert record("3 direct 15 features", ok,
                  f"rounds 3-5 within {spread:.1%} of round 2 (need <= 5%), best {best:.3f} <= 4.1"
                  f" ({costs_text(reports)})")


def test_criterion_4_ghjb_15_features():
    reports, _ = oscillator_run("ghjb", 6)
    second = reports[1].test_cost
    veers = [r for r in reports if r.round >= 4 and (r.diverged or r.test_cost > 6)]
    ok = 3.75 <= second <= 4.15 and bool(veers)
    assert record("4 GHJB 15 features", ok,
                  f"round 2 {second:.3f} in [3.75, 4.15], rounds >= 4 above 6 or diverged: "
                  f"{[r.round for r in veers]} ({costs_text(reports)})")


@pytest.mark.slow
def test_criterion_5_random_feature_sweep():
    t0 = time.perf_counter()
    _, summary, ref = reproduce_fig4(FIG4_QUICK_COUNTS, runs_per_count=5, rounds=19, base_seed=0)
    secs = time.perf_counter() - t0
    rel = {k: v / ref - 1.0 for k, v in summary.items()}
    a = rel[(30, "direct")] <= 0.015
    b = rel[(30, "ghjb")] >= 0.02
    c = rel[(5, "direct")] <= 0.05
    ok = a and b and c and secs < 1800
    table = ", ".join(f"{m}@{n} {100 * v:+.2f}%" for (n, m), v in sorted(rel.items()))
    assert record("5 random-feature sweep", ok,
                  f"reference {ref:.4f}; (a) {a} (b) {b} (c) {c}; {secs:.0f}s < 1800s ({table})")


def test_criterion_6_property_suite():
    t0 = time.perf_counter()
    results = run_checks()
    secs = time.perf_counter() - t0
    ok = all(r.passed for r in results) and secs < 60
    print(format_table(results))
    failed = [r.name for r in results if not r.passed]
    assert record("6 property suite", ok, f"{len(results) - len(failed)}/{len(results)} checks, {secs:.0f}s < 60s"
                  + (f"; failing: {failed}" if failed else ""))


if __name__ == "__main__":
    import sys
    sys.exit(pytest.main([__file__, "-q"]))
