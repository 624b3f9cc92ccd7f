"""Near-optimal feedback controllers by policy iteration on control-affine plants.

Two learners are provided: the indirect GHJB fit of the cost-to-go's time
derivative, and direct supervision of the cost-to-go gradient from
forward/backward sweeps.
"""

__version__ = "0.1.0"

from .controllers import feature_linear, feature_tanh, improved_controller, saturated_linear
from .features import logcosh_basis, monomial_basis, sample_feature_matrix
from .gradient_sweep import ghjb_project, sweep, sweep_batch
from .learners import (NormalEquations, RoundReport, TrainingConfig, accumulate, fit_direct,
                       fit_ghjb, run_policy_iteration, solve_weights)
from .plants import (ClosedLoopSystem, DomainError, integrator_problem, make_integrator_loss,
                     make_integrator_plant, make_oscillator_loss, make_oscillator_plant,
                     oscillator_problem)
from .rollout import (DivergenceError, IntegrationConfig, Trajectory, integrate_closed_loop,
                      rollout_to_target)
