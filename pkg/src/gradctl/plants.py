"""Control-affine plants, cost-rate models and the closed loop they form.

Every map accepts either a single state of shape ``(nx,)`` or a batch of
shape ``(B, nx)`` and returns arrays with the same leading dimension.
Gradients of scalars are rows (shape ``(nx,)``); Jacobians are
``(rows, nx)``.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np

#: Largest command magnitude fed to a saturating loss.
SATURATION_LIMIT = 1.0 - 1000.0 * np.finfo(float).eps

#: Default integration step for the damped-integrator benchmark.
INTEGRATOR_STEP = 0.02


class DomainError(ValueError):
    """A command lies outside the open set on which a loss is defined."""


def _as_batch(x, width=None):
    x = np.asarray(x, dtype=float)
    single = x.ndim == 1
    X = x[None, :] if single else x
    if width is not None and X.shape[-1] != width:
        raise ValueError(f"expected trailing dimension {width}, got {X.shape[-1]}")
    return X, single


def _unbatch(a, single):
    return a[0] if single else a


@dataclass(frozen=True)
class PlantModel:
    """Plant ``xdot = f(x) + G(x) u``.

    The four callables operate on batches: ``drift_fn(X) -> (B, nx)``,
    ``input_fn(X) -> (B, nx, nu)``, ``drift_jac_fn(X) -> (B, nx, nx)`` and
    ``input_jac_fn(X) -> (B, nx, nu, nx)`` (``dG/dx``; ``None`` means G is
    constant).
    """

    nx: int
    nu: int
    drift_fn: Callable[[np.ndarray], np.ndarray]
    input_fn: Callable[[np.ndarray], np.ndarray]
    drift_jac_fn: Callable[[np.ndarray], np.ndarray]
    input_jac_fn: Callable[[np.ndarray], np.ndarray] | None = None
    name: str = "plant"

    @property
    def constant_input(self) -> bool:
        return self.input_jac_fn is None

    def drift(self, x):
        X, single = _as_batch(x, self.nx)
        return _unbatch(self.drift_fn(X), single)

    def input_matrix(self, x):
        X, single = _as_batch(x, self.nx)
        return _unbatch(self.input_fn(X), single)

    def drift_jacobian(self, x):
        X, single = _as_batch(x, self.nx)
        return _unbatch(self.drift_jac_fn(X), single)

    def input_matrix_jacobian(self, x):
        """``dG/dx`` with shape ``(nx, nu, nx)`` per state."""
        X, single = _as_batch(x, self.nx)
        if self.input_jac_fn is None:
            out = np.zeros((X.shape[0], self.nx, self.nu, self.nx))
        else:
            out = self.input_jac_fn(X)
        return _unbatch(out, single)

    def input_jacobian_contraction(self, x, u):
        """``d(G u)/dx`` at fixed ``u``; zero when G is constant."""
        X, single = _as_batch(x, self.nx)
        U, _ = _as_batch(u, self.nu)
        if self.input_jac_fn is None:
            out = np.zeros((X.shape[0], self.nx, self.nx))
        else:
            out = np.einsum("bimj,bm->bij", self.input_jac_fn(X), U)
        return _unbatch(out, single)

    def velocity(self, x, u):
        X, single = _as_batch(x, self.nx)
        U, _ = _as_batch(u, self.nu)
        out = self.drift_fn(X) + np.einsum("bim,bm->bi", self.input_fn(X), U)
        return _unbatch(out, single)


class LossModel:
    """Cost rate ``L(x, u)`` plus the command minimiser of ``p u + L``.

    ``argmin_command(p)`` takes ``p = gradJ . G`` (shape ``(nu,)`` or
    ``(B, nu)``) and returns the command minimising
    ``gradJ . (f + G u) + L(x, u)`` over the permissible set.
    ``argmin_jacobian(p)`` is its derivative ``du*/dp`` with shape
    ``(nu, nu)`` per row.
    """

    nx: int
    nu: int

    def rate(self, x, u):
        raise NotImplementedError

    def dstate(self, x, u):
        raise NotImplementedError

    def dcommand(self, x, u):
        raise NotImplementedError

    def argmin_command(self, p):
        raise NotImplementedError

    def argmin_jacobian(self, p):
        raise NotImplementedError


@dataclass(frozen=True)
class SaturatingLoss(LossModel):
    """``tanh(q x'x) + r [2 u atanh(u) + log(1 - u^2)]`` on ``|u| < 1``.

    The command term is summed over components, so ``nu > 1`` works, although
    only ``nu = 1`` appears in the benchmarks.
    """

    nx: int
    nu: int = 1
    q: float = 1.0
    r: float = 1.0

    def __post_init__(self):
        if self.q <= 0 or self.r <= 0:
            raise ValueError("q and r must be positive")

    def _check(self, U):
        if not np.all(np.abs(U) < 1.0):
            raise DomainError("saturating loss is undefined for |u| >= 1")

    def rate(self, x, u):
        X, single = _as_batch(x, self.nx)
        U, _ = _as_batch(u, self.nu)
        self._check(U)
        penalty = 2.0 * U * np.arctanh(U) + np.log1p(-U * U)
        out = np.tanh(self.q * np.sum(X * X, axis=1)) + self.r * penalty.sum(axis=1)
        return _unbatch(out, single)

    def dstate(self, x, u):
        X, single = _as_batch(x, self.nx)
        s = np.tanh(self.q * np.sum(X * X, axis=1))
        out = ((1.0 - s * s) * 2.0 * self.q)[:, None] * X
        return _unbatch(out, single)

    def dcommand(self, x, u):
        U, single = _as_batch(u, self.nu)
        self._check(U)
        return _unbatch(2.0 * self.r * np.arctanh(U), single)

    def argmin_command(self, p):
        P, single = _as_batch(p, self.nu)
        return _unbatch(-np.tanh(P / (2.0 * self.r)), single)

    def argmin_jacobian(self, p):
        P, single = _as_batch(p, self.nu)
        t = np.tanh(P / (2.0 * self.r))
        diag = -(1.0 - t * t) / (2.0 * self.r)
        out = diag[:, :, None] * np.eye(self.nu)
        return _unbatch(out, single)


@dataclass(frozen=True)
class QuadraticLoss(LossModel):
    """``x' Q x + u' R u / 2`` with unconstrained commands."""

    Q: np.ndarray
    R: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "Q", np.atleast_2d(np.asarray(self.Q, dtype=float)))
        object.__setattr__(self, "R", np.atleast_2d(np.asarray(self.R, dtype=float)))

    @property
    def nx(self):
        return self.Q.shape[0]

    @property
    def nu(self):
        return self.R.shape[0]

    def rate(self, x, u):
        X, single = _as_batch(x, self.nx)
        U, _ = _as_batch(u, self.nu)
        out = np.einsum("bi,ij,bj->b", X, self.Q, X) + 0.5 * np.einsum("bi,ij,bj->b", U, self.R, U)
        return _unbatch(out, single)

    def dstate(self, x, u):
        X, single = _as_batch(x, self.nx)
        return _unbatch(X @ (self.Q + self.Q.T), single)

    def dcommand(self, x, u):
        U, single = _as_batch(u, self.nu)
        return _unbatch(U @ (0.5 * (self.R + self.R.T)), single)

    def argmin_command(self, p):
        P, single = _as_batch(p, self.nu)
        return _unbatch(-np.linalg.solve(self.R, P.T).T, single)

    def argmin_jacobian(self, p):
        P, single = _as_batch(p, self.nu)
        out = np.broadcast_to(-np.linalg.inv(self.R), (P.shape[0], self.nu, self.nu)).copy()
        return _unbatch(out, single)


class ClosedLoopSystem:
    """A plant driven by a fixed feedback law, scored by a loss.

    Exposes the closed-loop velocity ``F(x) = f + G u(x)``, the loss along
    the loop ``L_n(x) = L(x, u(x))`` and their total state derivatives.
    """

    def __init__(self, plant: PlantModel, loss: LossModel, controller):
        self.plant = plant
        self.loss = loss
        self.controller = controller
        self.nx = plant.nx
        self.nu = plant.nu

    def velocity(self, x):
        X, single = _as_batch(x, self.nx)
        return _unbatch(self._evaluate(X)[0], single)

    def loss_rate(self, x):
        X, single = _as_batch(x, self.nx)
        return _unbatch(self._evaluate(X)[1], single)

    def velocity_jacobian(self, x):
        X, single = _as_batch(x, self.nx)
        return _unbatch(self._linearize(X)[2], single)

    def loss_gradient(self, x):
        X, single = _as_batch(x, self.nx)
        return _unbatch(self._linearize(X)[3], single)

    def _evaluate(self, X):
        """Batch ``(F, L, u)``."""
        U = self.controller.eval(X)
        F = self.plant.velocity(X, U)
        L = self.loss.rate(X, U)
        return F, L, U

    def _linearize(self, X):
        """Batch ``(F, L, DF/Dx, DL/Dx)``."""
        U, Du = self.controller._eval_jacobian(X)
        G = self.plant.input_matrix(X)
        F = self.plant.drift(X) + np.einsum("bim,bm->bi", G, U)
        L = self.loss.rate(X, U)
        DF = (self.plant.drift_jacobian(X)
              + self.plant.input_jacobian_contraction(X, U)
              + np.einsum("bim,bmj->bij", G, Du))
        DL = self.loss.dstate(X, U) + np.einsum("bm,bmj->bj", self.loss.dcommand(X, U), Du)
        return F, L, DF, DL


# --- benchmark problems -----------------------------------------------------

def _constant_input(nx, column):
    G = np.asarray(column, dtype=float).reshape(nx, -1)
    return lambda X: np.broadcast_to(G, (X.shape[0],) + G.shape)


def _oscillator_drift(X):
    x1, x2 = X[:, 0], X[:, 1]
    r2 = x1 * x1 + x2 * x2
    return np.stack([x1 + x2 - x1 * r2, -x1 + x2 - x2 * r2], axis=1)


def _oscillator_drift_jac(X):
    x1, x2 = X[:, 0], X[:, 1]
    J = np.empty((X.shape[0], 2, 2))
    J[:, 0, 0] = 1.0 - 3.0 * x1 * x1 - x2 * x2
    J[:, 0, 1] = 1.0 - 2.0 * x1 * x2
    J[:, 1, 0] = -1.0 - 2.0 * x1 * x2
    J[:, 1, 1] = 1.0 - x1 * x1 - 3.0 * x2 * x2
    return J


def make_oscillator_plant() -> PlantModel:
    """Unstable oscillator with a stable limit cycle at ``|x| = 1``; G = (0, 1)'."""
    return PlantModel(2, 1, _oscillator_drift, _constant_input(2, [0.0, 1.0]),
                      _oscillator_drift_jac, name="oscillator")


def make_oscillator_loss() -> SaturatingLoss:
    return SaturatingLoss(nx=2, nu=1, q=1.0, r=1.0)


_INTEGRATOR_A = np.array([[0.0, 1.0], [0.0, -1.0]])


def make_integrator_plant() -> PlantModel:
    """Damped double integrator ``x1' = x2, x2' = -x2 + u``."""
    return PlantModel(2, 1, lambda X: X @ _INTEGRATOR_A.T, _constant_input(2, [0.0, 1.0]),
                      lambda X: np.broadcast_to(_INTEGRATOR_A, (X.shape[0], 2, 2)),
                      name="integrator")


def make_integrator_loss(Q: float = 100.0, R: float = 1.0) -> SaturatingLoss:
    if Q <= 0 or R <= 0:
        raise ValueError("Q and R must be positive")
    return SaturatingLoss(nx=2, nu=1, q=float(Q), r=float(R))


def make_linear_plant(A, B) -> PlantModel:
    """``xdot = A x + B u`` with constant matrices."""
    A = np.atleast_2d(np.asarray(A, dtype=float))
    B = np.asarray(B, dtype=float).reshape(A.shape[0], -1)
    return PlantModel(A.shape[0], B.shape[1], lambda X: X @ A.T, _constant_input(A.shape[0], B),
                      lambda X: np.broadcast_to(A, (X.shape[0],) + A.shape), name="linear")


@dataclass(frozen=True)
class Problem:
    """A benchmark: plant, loss, test movements and the initial controller's gain."""

    name: str
    plant: PlantModel
    loss: LossModel
    test_states: np.ndarray
    initial_gain: np.ndarray
    box_halfwidth: float
    integration: object = None

    def __post_init__(self):
        if self.integration is None:
            from .rollout import IntegrationConfig
            object.__setattr__(self, "integration", IntegrationConfig())

    def initial_controller(self):
        from .controllers import saturated_linear
        return saturated_linear(self.initial_gain, clamp=1.0)

    def improved_controller(self, w, basis):
        from .controllers import improved_controller
        return improved_controller(w, basis, self.plant, self.loss)


def oscillator_problem() -> Problem:
    """Constrained oscillator: gain (-5, -3) saturated at 1, test from (0, 1), box 1."""
    return Problem("oscillator_5_1", make_oscillator_plant(), make_oscillator_loss(),
                   np.array([[0.0, 1.0]]), np.array([-5.0, -3.0]), 1.0)


def integrator_problem(Q: float = 100.0, R: float = 1.0, step: float = INTEGRATOR_STEP) -> Problem:
    """Damped integrator with steep state cost: gain (-1, -1), test from (0.4, 0.4), box 0.5.

    The learned laws reach gains of order ``Q`` near the origin, so the
    default step is smaller than the oscillator's 0.1; at 0.1 the
    three-stage scheme develops spurious fixed points.
    """
    from .rollout import IntegrationConfig
    return Problem("integrator_5_2", make_integrator_plant(), make_integrator_loss(Q, R),
                   np.array([[0.4, 0.4]]), np.array([-1.0, -1.0]), 0.5,
                   IntegrationConfig(step=step))


PROBLEMS = {"oscillator_5_1": oscillator_problem, "integrator_5_2": integrator_problem}
