"""The sweep estimates the gradient of the cost-to-go, not the costate.

For xdot = -x + u under the fixed law u = -2x with L = x^2 + u^2/2, the
cost-to-go is J = x^2/2 so gradJ = x. The costate of the same trajectory,
which holds the control signal fixed instead of the feedback law, is x/2.
Policy improvement needs the former.

    python3 demos/gradient_vs_costate.py
"""
import numpy as np

from gradctl import ClosedLoopSystem, sweep
from gradctl.controllers import LinearController
from gradctl.plants import QuadraticLoss, make_linear_plant

plant = make_linear_plant([[-1.0]], [[1.0]])
system = ClosedLoopSystem(plant, QuadraticLoss([[1.0]], [[1.0]]), LinearController([[-2.0]]))
result = sweep(system, np.array([1.0]))

for k in range(0, len(result), max(1, len(result) // 6)):
    x, g = result.states[k, 0], result.grads[k, 0]
    print(f"x = {x:8.5f}   swept gradJ = {g:8.5f}   costate x/2 = {x / 2:8.5f}")
print("max |gradJ - x| =", np.max(np.abs(result.grads - result.states)))
