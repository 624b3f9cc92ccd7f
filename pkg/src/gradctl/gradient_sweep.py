"""Teaching samples of the cost-to-go gradient from forward/backward sweeps.

A sweep runs the closed loop forward from ``x0`` until the loss falls below
the floor, storing every visited state ("breadcrumbs"). It then integrates
the gradient of the cost-to-go backward in time,

    d(gradJ)/dt = -DL/Dx - gradJ DF/Dx,

from ``gradJ = 0`` at the terminal state. After each backward step the state
is reset to the stored breadcrumb, so the reverse pass retraces the forward
path, and the gradient is given the smallest correction that makes
``gradJ . F(x) = -L(x)`` hold exactly.
"""
from __future__ import annotations

import csv
from dataclasses import dataclass, field

import numpy as np

from .plants import ClosedLoopSystem
from .rollout import DivergenceError, IntegrationConfig, integrate_batch

#: Below this speed the velocity constraint is degenerate and is not imposed.
MIN_SPEED = 1e-12


class SweepDivergedError(DivergenceError):
    def __init__(self, step: int):
        super().__init__(step, "backward gradient integration produced non-finite values")


@dataclass
class GradientSample:
    state: np.ndarray
    grad: np.ndarray
    grad_g: np.ndarray


@dataclass
class SweepResult:
    """Samples ordered along the forward trajectory, from ``x0`` to the terminal state."""

    states: np.ndarray
    grads: np.ndarray
    grads_g: np.ndarray
    reached_floor: bool
    steps: int
    warnings: list = field(default_factory=list)

    @property
    def samples(self) -> list[GradientSample]:
        return [GradientSample(x, g, gg) for x, g, gg in zip(self.states, self.grads, self.grads_g)]

    def __len__(self):
        return len(self.states)

    def to_csv(self, path) -> None:
        """Columns ``x1..xn, g1..gn``."""
        nx = self.states.shape[1]
        header = [f"x{i + 1}" for i in range(nx)] + [f"g{i + 1}" for i in range(nx)]
        with open(path, "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(header)
            for x, g in zip(self.states, self.grads):
                writer.writerow([repr(float(v)) for v in (*x, *g)])


def ghjb_project(grad, xdot, loss_value):
    """Minimum-norm correction of ``grad`` onto ``{g : g . xdot = -loss_value}``.

    Works row-wise on batches. Rows with ``|xdot| < 1e-12`` are returned
    unchanged.
    """
    grad = np.asarray(grad, dtype=float)
    xdot = np.asarray(xdot, dtype=float)
    loss_value = np.asarray(loss_value, dtype=float)
    speed2 = np.sum(xdot * xdot, axis=-1)
    ok = speed2 >= MIN_SPEED ** 2
    residual = np.sum(grad * xdot, axis=-1) + loss_value
    scale = np.where(ok, residual / np.where(ok, speed2, 1.0), 0.0)
    return grad - scale[..., None] * xdot


def sweep_batch(sys: ClosedLoopSystem, X0, cfg: IntegrationConfig = IntegrationConfig()) -> list[SweepResult]:
    """Run one sweep per row of ``X0``, vectorised across sweeps."""
    states, _, _, last = integrate_batch(sys, X0, cfg, stop_at_floor=True)
    n_total, B, nx = states.shape
    h = cfg.step
    tab = cfg.tableau
    top = int(last.max())

    grads = np.zeros((top + 1, B, nx))
    # terminal samples: zero gradient, projected like every other breadcrumb
    X_end = states[last, np.arange(B)]
    F_end, L_end, _ = sys._evaluate(X_end)
    grads[last, np.arange(B)] = ghjb_project(np.zeros((B, nx)), F_end, L_end)

    J = np.zeros((B, nx))
    for n in range(top, 0, -1):
        active = n <= last
        X = states[n]
        Ks, Gs = [], []
        for a_row in tab.a:
            Xs, Js = X, J
            for a, kx, kj in zip(a_row, Ks, Gs):
                if a:
                    Xs = Xs + (h * a) * kx
                    Js = Js + (h * a) * kj
            F, _, DF, DL = sys._linearize(Xs)
            Ks.append(-F)
            Gs.append(DL + np.einsum("bi,bij->bj", Js, DF))
        Jn = J + h * sum(b * g for b, g in zip(tab.b, Gs))
        # breadcrumb: the backward state is replaced by the stored forward state
        X_prev = states[n - 1]
        F, L, _ = sys._evaluate(X_prev)
        Jn = ghjb_project(Jn, F, L)
        J = np.where(active[:, None], Jn, J)
        if not np.all(np.isfinite(J)):
            raise SweepDivergedError(n)
        grads[n - 1] = np.where(active[:, None], J, grads[n - 1])

    results = []
    L_last = L_end
    for b in range(B):
        k = int(last[b])
        X_b = states[:k + 1, b].copy()
        G_b = grads[:k + 1, b].copy()
        Gmat = sys.plant.input_matrix(X_b)
        reached = bool(L_last[b] < cfg.loss_floor)
        warn = [] if reached else [f"loss floor not reached; terminal loss {L_last[b]:.3e}"]
        results.append(SweepResult(X_b, G_b, np.einsum("ti,tim->tm", G_b, Gmat), reached, k, warn))
    return results


def sweep(sys: ClosedLoopSystem, x0, cfg: IntegrationConfig = IntegrationConfig()) -> SweepResult:
    """Gradient samples along the movement from a single ``x0``."""
    return sweep_batch(sys, np.atleast_2d(x0), cfg)[0]
