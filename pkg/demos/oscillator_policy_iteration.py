"""Policy iteration on the constrained oscillator.

Both learners start from the saturated linear law u = sat(-5 x1 - 3 x2) and
improve it for five rounds with 24 monomial features. The GHJB fit peaks
early and drifts upward; direct gradient supervision keeps improving.

    python3 demos/oscillator_policy_iteration.py
"""
import numpy as np

from gradctl import TrainingConfig, monomial_basis, oscillator_problem, run_policy_iteration

problem = oscillator_problem()
basis = monomial_basis(8)
print(f"{basis.nf} monomial features, test movement from {problem.test_states[0]}")

for method in ("ghjb", "direct_grad_g"):
    cfg = TrainingConfig(method=method, rounds=5, seed=0)
    reports = run_policy_iteration(problem, basis, problem.initial_controller(), cfg)
    costs = "  ".join(f"{r.test_cost:6.3f}" for r in reports)
    print(f"{method:14s} u1..u6: {costs}")

# The learned law is a smooth saturating feedback; look at it along the x2 axis.
w = reports[-1].weights
law = problem.improved_controller(w, basis)
x2 = np.linspace(-1, 1, 5)
print("u(0, x2) for x2 in", x2, "->", np.round(law.eval(np.c_[np.zeros(5), x2])[:, 0], 3))
