"""Feedback laws ``u(x)`` with analytic Jacobians ``du/dx``."""
from __future__ import annotations

import numpy as np

from .features import load_matrix_csv, save_matrix_csv
from .plants import SATURATION_LIMIT, QuadraticLoss, SaturatingLoss, _as_batch, _unbatch


class Controller:
    """Base feedback law. ``eval`` returns ``(nu,)`` or ``(B, nu)``;
    ``jacobian`` returns ``(nu, nx)`` or ``(B, nu, nx)``."""

    kind = "controller"
    nx: int
    nu: int

    def eval(self, x):
        X, single = _as_batch(x, self.nx)
        return _unbatch(self._eval(X), single)

    def jacobian(self, x):
        X, single = _as_batch(x, self.nx)
        return _unbatch(self._jacobian(X), single)

    __call__ = eval

    def _eval_jacobian(self, X):
        return self._eval(X), self._jacobian(X)


class SaturatedLinear(Controller):
    """``u = sat(K x)`` clipped just inside ``+-clamp``.

    Inside the linear region the Jacobian is ``K``; on the saturated side
    it is zero, including at the kink itself.
    """

    kind = "saturated_linear"

    def __init__(self, gain, clamp: float = 1.0):
        if not 0.0 < clamp <= 1.0:
            raise ValueError("clamp must lie in (0, 1]")
        self.gain = np.atleast_2d(np.asarray(gain, dtype=float))
        self.nu, self.nx = self.gain.shape
        self.clamp = float(clamp)
        self.limit = clamp * SATURATION_LIMIT

    def __repr__(self):
        return f"SaturatedLinear(gain={self.gain.tolist()}, clamp={self.clamp})"

    def _eval(self, X):
        return np.clip(X @ self.gain.T, -self.limit, self.limit)

    def _jacobian(self, X):
        inside = np.abs(X @ self.gain.T) < self.clamp
        return inside[:, :, None] * self.gain[None]


def saturated_linear(gain, clamp: float = 1.0) -> SaturatedLinear:
    return SaturatedLinear(gain, clamp)


class ZeroController(Controller):
    kind = "zero"

    def __init__(self, nx: int, nu: int = 1):
        self.nx, self.nu = nx, nu

    def _eval(self, X):
        return np.zeros((X.shape[0], self.nu))

    def _jacobian(self, X):
        return np.zeros((X.shape[0], self.nu, self.nx))


class LinearController(Controller):
    """Unsaturated ``u = K x``."""

    kind = "linear"

    def __init__(self, gain):
        self.gain = np.atleast_2d(np.asarray(gain, dtype=float))
        self.nu, self.nx = self.gain.shape

    def _eval(self, X):
        return X @ self.gain.T

    def _jacobian(self, X):
        return np.broadcast_to(self.gain, (X.shape[0], self.nu, self.nx)).copy()


class FeatureController(Controller):
    """The improved law ``u = argmin(w . dtheta/dx . G)`` for a learned weight row.

    ``argmin`` and ``argmin_jacobian`` map the pre-activation
    ``p = w grad(theta) G`` (batched ``(B, nu)``) to the command and to
    ``du/dp``; any loss that provides them yields a controller.
    """

    def __init__(self, w, basis, plant, argmin, argmin_jacobian, kind="feature", limit=None):
        self.w = np.asarray(w, dtype=float).ravel()
        if self.w.size != basis.nf:
            raise ValueError(f"weight length {self.w.size} does not match basis nf={basis.nf}")
        self.basis = basis
        self.plant = plant
        self.nx, self.nu = plant.nx, plant.nu
        self._argmin = argmin
        self._argmin_jac = argmin_jacobian
        self.kind = kind
        self.limit = limit

    def __repr__(self):
        return f"FeatureController(kind={self.kind!r}, basis={self.basis!r})"

    def preactivation(self, x):
        X, single = _as_batch(x, self.nx)
        return _unbatch(self._preactivation(X), single)

    def _preactivation(self, X):
        grad = np.einsum("k,bkj->bj", self.w, self.basis._jacobian(X))
        return np.einsum("bj,bjm->bm", grad, self.plant.input_fn(X))

    def _eval(self, X):
        u = self._argmin(self._preactivation(X))
        if self.limit is not None:
            u = np.clip(u, -self.limit, self.limit)
        return u

    def _jacobian(self, X):
        return self._eval_jacobian(X)[1]

    def _eval_jacobian(self, X):
        p = self._preactivation(X)
        u = self._argmin(p)
        if self.limit is not None:
            u = np.clip(u, -self.limit, self.limit)
        C = self.basis.g_hessian_contraction(X, self.plant)
        if C.ndim == 3:
            C = C[:, :, None, :]
        dp_dx = np.einsum("k,bkmj->bmj", self.w, C)
        return u, np.einsum("bmn,bnj->bmj", self._argmin_jac(p), dp_dx)


def feature_tanh(w, basis, plant, R: float = 1.0) -> FeatureController:
    """``u = -tanh(w grad(theta) G / 2R)``, kept strictly inside (-1, 1)."""
    if R <= 0:
        raise ValueError("R must be positive")
    loss = SaturatingLoss(nx=plant.nx, nu=plant.nu, r=R)
    return FeatureController(w, basis, plant, loss.argmin_command, loss.argmin_jacobian,
                             kind="feature_tanh", limit=SATURATION_LIMIT)


def feature_linear(w, basis, plant) -> FeatureController:
    """``u = -(w grad(theta) G)'``, the minimiser for a ``u'u/2`` command cost."""
    loss = QuadraticLoss(np.eye(plant.nx), np.eye(plant.nu))
    return FeatureController(w, basis, plant, loss.argmin_command, loss.argmin_jacobian,
                             kind="feature_linear")


def improved_controller(w, basis, plant, loss) -> FeatureController:
    """Policy-improvement law for ``loss``, via its command minimiser."""
    if isinstance(loss, SaturatingLoss):
        return feature_tanh(w, basis, plant, loss.r)
    if isinstance(loss, QuadraticLoss) and np.allclose(loss.R, np.eye(loss.nu)):
        return feature_linear(w, basis, plant)
    return FeatureController(w, basis, plant, loss.argmin_command, loss.argmin_jacobian)


def save_weights_csv(path, w) -> None:
    save_matrix_csv(path, np.atleast_2d(np.asarray(w, dtype=float)))


def load_weights_csv(path) -> np.ndarray:
    return load_matrix_csv(path).ravel()
