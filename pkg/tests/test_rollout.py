import numpy as np
import pytest

from gradctl.controllers import saturated_linear
from gradctl.plants import ClosedLoopSystem, integrator_problem, oscillator_problem
from gradctl.rollout import (RK4, SSP3, DivergenceError, IntegrationConfig, integrate_closed_loop,
                             rollout_to_target, total_costs)


def test_tableaux_are_consistent():
    for tab in (SSP3, RK4):
        assert sum(tab.b) == pytest.approx(1.0)


@pytest.mark.parametrize("scheme", ["ssp3", "rk4"])
def test_scalar_cost_matches_closed_form(scalar_system, scheme):
    traj = integrate_closed_loop(scalar_system, np.array([1.0]), IntegrationConfig(scheme=scheme))
    assert traj.total_cost == pytest.approx(0.5, abs=1e-3)
    assert len(traj) == 401


def test_third_order_convergence(scalar_system):
    errs = [abs(total_costs(scalar_system, [[1.0]], IntegrationConfig(step=h))[0] - 0.5) for h in (0.2, 0.1)]
    assert errs[0] / errs[1] == pytest.approx(8.0, rel=0.2)


@pytest.mark.parametrize("problem", [oscillator_problem(), integrator_problem()], ids=lambda p: p.name)
def test_origin_is_free(problem):
    sys = ClosedLoopSystem(problem.plant, problem.loss, problem.initial_controller())
    assert integrate_closed_loop(sys, np.zeros(2), problem.integration).total_cost == 0.0
    traj, reached = rollout_to_target(sys, np.zeros(2), problem.integration)
    assert reached and len(traj) == 1


def test_initial_oscillator_law_reaches_target():
    problem = oscillator_problem()
    sys = ClosedLoopSystem(problem.plant, problem.loss, problem.initial_controller())
    traj, reached = rollout_to_target(sys, problem.test_states[0], problem.integration)
    assert reached and len(traj) - 1 < 400
    np.testing.assert_array_equal(traj.states[0], [0.0, 1.0])
    assert np.all(np.diff(traj.cumulative_cost) >= 0)


def test_destabilising_law_is_reported():
    problem = oscillator_problem()
    sys = ClosedLoopSystem(problem.plant, problem.loss, saturated_linear([5.0, 3.0]))
    try:
        _, reached = rollout_to_target(sys, problem.test_states[0], problem.integration)
    except DivergenceError:
        return
    assert not reached


@pytest.mark.parametrize("kwargs", [dict(step=0.0), dict(horizon=0.01), dict(loss_floor=-1.0),
                                    dict(scheme="euler")])
def test_config_validated(kwargs):
    with pytest.raises(ValueError):
        IntegrationConfig(**kwargs)


def test_batched_rollouts_match_single(scalar_system):
    X0 = np.array([[1.0], [-0.3], [0.6]])
    batch = total_costs(scalar_system, X0, IntegrationConfig())
    single = [integrate_closed_loop(scalar_system, x, IntegrationConfig()).total_cost for x in X0]
    np.testing.assert_allclose(batch, single, rtol=0, atol=1e-15)


def test_trajectory_csv(tmp_path):
    problem = oscillator_problem()
    sys = ClosedLoopSystem(problem.plant, problem.loss, problem.initial_controller())
    traj = integrate_closed_loop(sys, problem.test_states[0], IntegrationConfig(horizon=1.0))
    traj.to_csv(tmp_path / "t.csv")
    lines = (tmp_path / "t.csv").read_text().splitlines()
    assert lines[0] == "t,x1,x2,u1,cumulative_cost"
    assert len(lines) == len(traj) + 1
    row = np.loadtxt(tmp_path / "t.csv", delimiter=",", skiprows=1)
    np.testing.assert_array_equal(row[0, 1:3], [0.0, 1.0])
