"""Fixed-step closed-loop integration with stage-weighted cost accumulation."""
from __future__ import annotations

import csv
from dataclasses import dataclass

import numpy as np

from .plants import ClosedLoopSystem

#: State norm beyond which a rollout is declared divergent.
DIVERGENCE_NORM = 1e6


@dataclass(frozen=True)
class Tableau:
    """Explicit Runge-Kutta coefficients."""

    a: tuple
    b: tuple


# Three-stage, third-order: k2 at x + h k1, k3 at x + h (k1 + k2)/4,
# update with weights (1, 1, 4)/6.
SSP3 = Tableau(a=((), (1.0,), (0.25, 0.25)), b=(1 / 6, 1 / 6, 4 / 6))
RK4 = Tableau(a=((), (0.5,), (0.0, 0.5), (0.0, 0.0, 1.0)), b=(1 / 6, 1 / 3, 1 / 3, 1 / 6))
SCHEMES = {"ssp3": SSP3, "rk4": RK4}


@dataclass(frozen=True)
class IntegrationConfig:
    """Step ``h`` and horizon in natural time units; ``loss_floor`` ends goal-directed rollouts."""

    step: float = 0.1
    horizon: float = 40.0
    loss_floor: float = 1e-6
    scheme: str = "ssp3"

    def __post_init__(self):
        if not self.step > 0:
            raise ValueError("step must be positive")
        if not self.horizon >= self.step:
            raise ValueError("horizon must be at least one step")
        if self.loss_floor < 0:
            raise ValueError("loss_floor must be nonnegative")
        if self.scheme not in SCHEMES:
            raise ValueError(f"unknown scheme {self.scheme!r}; choose from {sorted(SCHEMES)}")

    @property
    def n_steps(self) -> int:
        return int(round(self.horizon / self.step))

    @property
    def tableau(self) -> Tableau:
        return SCHEMES[self.scheme]


class DivergenceError(RuntimeError):
    """The closed loop left every reasonable neighbourhood of the target."""

    def __init__(self, step: int, message: str = "closed-loop state diverged"):
        super().__init__(f"{message} at step {step}")
        self.step = step


@dataclass
class Trajectory:
    times: np.ndarray
    states: np.ndarray
    commands: np.ndarray
    cumulative_cost: np.ndarray

    @property
    def total_cost(self) -> float:
        return float(self.cumulative_cost[-1])

    def __len__(self):
        return len(self.times)

    def to_csv(self, path) -> None:
        """Columns ``t, x1..xn, u1..um, cumulative_cost``."""
        nx, nu = self.states.shape[1], self.commands.shape[1]
        header = ["t"] + [f"x{i + 1}" for i in range(nx)] + [f"u{i + 1}" for i in range(nu)]
        header.append("cumulative_cost")
        with open(path, "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(header)
            for t, x, u, c in zip(self.times, self.states, self.commands, self.cumulative_cost):
                writer.writerow([repr(float(v)) for v in (t, *x, *u, c)])


def _diverged(X):
    return ~np.all(np.isfinite(X), axis=1) | (np.linalg.norm(X, axis=1) > DIVERGENCE_NORM)


def integrate_batch(sys: ClosedLoopSystem, X0, cfg: IntegrationConfig, stop_at_floor: bool = False):
    """Integrate many initial states at once.

    Returns ``(states, commands, costs, last)`` where ``states`` has shape
    ``(n_steps + 1, B, nx)``, ``costs`` is the running cost per state and
    ``last[b]`` is the index of the final recorded state of movement ``b``
    (rows past it repeat the frozen terminal state). With ``stop_at_floor``
    a movement ends at the first state whose loss falls below the floor.
    Raises :class:`DivergenceError` when any movement diverges.
    """
    X = np.array(X0, dtype=float, ndmin=2)
    B, nx = X.shape
    h, n = cfg.step, cfg.n_steps
    tab = cfg.tableau
    states = np.empty((n + 1, B, nx))
    commands = np.empty((n + 1, B, sys.nu))
    costs = np.empty((n + 1, B))
    C = np.zeros(B)
    active = np.ones(B, dtype=bool)
    last = np.full(B, n)
    for step in range(n):
        K, Ls = [], []
        for a_row in tab.a:
            Xs = X
            for a, k in zip(a_row, K):
                if a:
                    Xs = Xs + (h * a) * k
            F, L, U = sys._evaluate(Xs)
            if not K:
                states[step], commands[step], costs[step] = X, U, C
                if stop_at_floor:
                    done = active & (L < cfg.loss_floor)
                    last[done] = step
                    active &= ~done
                    if not active.any():
                        _freeze_tail(states, commands, costs, step)
                        return states, commands, costs, last
            K.append(F)
            Ls.append(L)
        Xn = X + h * sum(b * k for b, k in zip(tab.b, K))
        Cn = C + h * sum(b * l for b, l in zip(tab.b, Ls))
        X = np.where(active[:, None], Xn, X)
        C = np.where(active, Cn, C)
        if _diverged(X).any():
            raise DivergenceError(step + 1)
    states[n], costs[n] = X, C
    commands[n] = sys.controller.eval(X)
    return states, commands, costs, last


def _freeze_tail(states, commands, costs, step):
    states[step + 1:] = states[step]
    commands[step + 1:] = commands[step]
    costs[step + 1:] = costs[step]


def _trajectory(states, commands, costs, b, last, h):
    k = last + 1
    return Trajectory(np.arange(k) * h, states[:k, b].copy(), commands[:k, b].copy(), costs[:k, b].copy())


def integrate_closed_loop(sys: ClosedLoopSystem, x0, cfg: IntegrationConfig = IntegrationConfig()) -> Trajectory:
    """Run the closed loop from ``x0`` over the full horizon."""
    states, commands, costs, last = integrate_batch(sys, np.atleast_2d(x0), cfg)
    return _trajectory(states, commands, costs, 0, last[0], cfg.step)


def rollout_to_target(sys: ClosedLoopSystem, x0, cfg: IntegrationConfig = IntegrationConfig()):
    """Run until the loss drops below ``cfg.loss_floor``; returns ``(trajectory, reached)``."""
    states, commands, costs, last = integrate_batch(sys, np.atleast_2d(x0), cfg, stop_at_floor=True)
    traj = _trajectory(states, commands, costs, 0, last[0], cfg.step)
    reached = bool(sys.loss_rate(traj.states[-1]) < cfg.loss_floor)
    return traj, reached


def total_costs(sys: ClosedLoopSystem, X0, cfg: IntegrationConfig = IntegrationConfig()) -> np.ndarray:
    """Full-horizon cost from each row of ``X0``."""
    _, _, costs, _ = integrate_batch(sys, X0, cfg)
    return costs[-1].copy()
