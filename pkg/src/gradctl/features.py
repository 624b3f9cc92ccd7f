"""Differentiable feature bases for value-gradient approximation."""
from __future__ import annotations

import csv
from pathlib import Path

import numpy as np

from .plants import _as_batch, _unbatch


class FeatureBasis:
    """A fixed feature vector ``theta(x)`` with analytic derivatives.

    Subclasses implement the batched ``_eval``, ``_jacobian`` and
    ``_hessian`` (shapes ``(B, nf)``, ``(B, nf, nx)``, ``(B, nf, nx, nx)``).
    """

    nf: int
    nx: int

    def eval(self, x):
        X, single = _as_batch(x, self.nx)
        return _unbatch(self._eval(X), single)

    def jacobian(self, x):
        X, single = _as_batch(x, self.nx)
        return _unbatch(self._jacobian(X), single)

    def hessian(self, x):
        X, single = _as_batch(x, self.nx)
        return _unbatch(self._hessian(X), single)

    def g_hessian_contraction(self, x, plant):
        """State derivative of ``jacobian(x) @ G(x)``.

        Returns shape ``(nf, nx)`` per state for single-input plants and
        ``(nf, nu, nx)`` otherwise; entry ``[k, m, j]`` is
        ``d/dx_j sum_i dtheta_k/dx_i G_im``.
        """
        X, single = _as_batch(x, self.nx)
        G = plant.input_fn(X)
        out = np.einsum("bkij,bim->bkmj", self._hessian(X), G)
        if not plant.constant_input:
            out = out + np.einsum("bki,bimj->bkmj", self._jacobian(X), plant.input_jac_fn(X))
        if plant.nu == 1:
            out = out[:, :, 0, :]
        return _unbatch(out, single)

    def _eval(self, X):
        raise NotImplementedError

    def _jacobian(self, X):
        raise NotImplementedError

    def _hessian(self, X):
        raise NotImplementedError


class MonomialBasis(FeatureBasis):
    """Monomials ``x1^a x2^b`` given by an exponent table of shape ``(nf, nx)``."""

    def __init__(self, exponents):
        self.exponents = np.asarray(exponents, dtype=int)
        self.nf, self.nx = self.exponents.shape

    def __repr__(self):
        return f"MonomialBasis(nf={self.nf})"

    @staticmethod
    def _powers(X, E):
        # X[:, None, :] ** E with 0**0 = 1 and negative exponents treated as 0 coefficient
        return np.power(X[:, None, :], np.maximum(E, 0)[None])

    def _eval(self, X):
        return np.prod(self._powers(X, self.exponents), axis=2)

    def _jacobian(self, X):
        E = self.exponents
        out = np.empty((X.shape[0], self.nf, self.nx))
        for j in range(self.nx):
            Ej = E.copy()
            Ej[:, j] -= 1
            out[:, :, j] = E[:, j] * np.prod(self._powers(X, Ej), axis=2)
        return out

    def _hessian(self, X):
        E = self.exponents
        out = np.empty((X.shape[0], self.nf, self.nx, self.nx))
        for i in range(self.nx):
            for j in range(i, self.nx):
                Eij = E.copy()
                Eij[:, i] -= 1
                coef = E[:, i].astype(float)
                coef = coef * Eij[:, j]
                Eij[:, j] -= 1
                block = coef * np.prod(self._powers(X, Eij), axis=2)
                out[:, :, i, j] = block
                out[:, :, j, i] = block
        return out


def monomial_exponents(max_order: int) -> np.ndarray:
    """Exponent pairs of every bivariate monomial of even order 2..max_order.

    Within one order the x1 exponent descends: x1^2, x1 x2, x2^2, x1^4, ...
    """
    if isinstance(max_order, bool) or int(max_order) != max_order or max_order < 2 or max_order % 2:
        raise ValueError(f"max_order must be an even integer >= 2, got {max_order!r}")
    rows = []
    for order in range(2, int(max_order) + 1, 2):
        rows.extend((a, order - a) for a in range(order, -1, -1))
    return np.array(rows, dtype=int)


def monomial_basis(max_order: int) -> MonomialBasis:
    """All bivariate monomials of orders 2, 4, ..., ``max_order`` (15 for 6, 24 for 8)."""
    return MonomialBasis(monomial_exponents(max_order))


def logcosh(z):
    """``log(cosh(z))`` without overflow."""
    a = np.abs(z)
    return a + np.log1p(np.exp(-2.0 * a)) - np.log(2.0)


class LogCoshBasis(FeatureBasis):
    """``theta_k(x) = log cosh(w_k . x)`` for the rows ``w_k`` of a fixed matrix."""

    def __init__(self, W):
        W = np.atleast_2d(np.asarray(W, dtype=float))
        if not np.all(np.isfinite(W)):
            raise ValueError("feature matrix must be finite")
        self.W = W
        self.nf, self.nx = W.shape

    def __repr__(self):
        return f"LogCoshBasis(nf={self.nf})"

    def _eval(self, X):
        return logcosh(X @ self.W.T)

    def _jacobian(self, X):
        return np.tanh(X @ self.W.T)[:, :, None] * self.W[None]

    def _hessian(self, X):
        t = np.tanh(X @ self.W.T)
        outer = self.W[:, :, None] * self.W[:, None, :]
        return (1.0 - t * t)[:, :, None, None] * outer[None]

    def g_hessian_contraction(self, x, plant):
        if not plant.constant_input:
            return super().g_hessian_contraction(x, plant)
        X, single = _as_batch(x, self.nx)
        t = np.tanh(X @ self.W.T)
        wG = self.W @ plant.input_fn(X[:1])[0]  # (nf, nu)
        out = (1.0 - t * t)[:, :, None, None] * wG[None, :, :, None] * self.W[None, :, None, :]
        if plant.nu == 1:
            out = out[:, :, 0, :]
        return _unbatch(out, single)


def logcosh_basis(W) -> LogCoshBasis:
    return LogCoshBasis(W)


def sample_feature_matrix(nf: int, nx: int, scale: float, rng) -> np.ndarray:
    """Random ``(nf, nx)`` matrix, entries uniform on ``[-scale, scale]``."""
    if nf < 1:
        raise ValueError("nf must be >= 1")
    if scale <= 0:
        raise ValueError("scale must be positive")
    return rng.uniform(-scale, scale, size=(nf, nx))


def save_matrix_csv(path, M) -> None:
    """Write a 2-D array as CSV, one row per line, full float precision."""
    M = np.atleast_2d(np.asarray(M, dtype=float))
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        for row in M:
            writer.writerow([repr(float(v)) for v in row])


def load_matrix_csv(path) -> np.ndarray:
    with open(Path(path), newline="") as fh:
        rows = [[float(v) for v in row] for row in csv.reader(fh) if row]
    return np.array(rows, dtype=float)
