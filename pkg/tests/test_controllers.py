import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from gradctl.checks import fd_jacobian, relative_error
from gradctl.controllers import (LinearController, ZeroController, feature_linear, feature_tanh,
                                 load_weights_csv, saturated_linear, save_weights_csv)
from gradctl.features import MonomialBasis, monomial_basis
from gradctl.plants import SATURATION_LIMIT, make_linear_plant, make_oscillator_plant


def test_initial_law_clamps_test_state():
    u = saturated_linear([-5.0, -3.0]).eval(np.array([0.0, 1.0]))
    assert u[0] == -SATURATION_LIMIT
    assert -1.0 < u[0]


def test_initial_law_interior():
    ctrl = saturated_linear([-1.0, -1.0])
    x = np.array([0.4, 0.4])
    assert ctrl.eval(x)[0] == pytest.approx(-0.8)
    np.testing.assert_array_equal(ctrl.jacobian(x), [[-1.0, -1.0]])


def test_initial_law_zero_at_origin():
    assert saturated_linear([-5.0, -3.0]).eval(np.zeros(2))[0] == 0.0


def test_saturated_side_has_zero_jacobian():
    np.testing.assert_array_equal(saturated_linear([-5.0, -3.0]).jacobian(np.array([0.0, 1.0])), [[0.0, 0.0]])


def test_clamp_validated():
    with pytest.raises(ValueError):
        saturated_linear([1.0, 1.0], clamp=1.5)


def test_zero_weights_give_zero_command():
    basis = monomial_basis(8)
    ctrl = feature_tanh(np.zeros(basis.nf), basis, make_oscillator_plant())
    np.testing.assert_array_equal(ctrl.eval(np.random.default_rng(0).uniform(-1, 1, (10, 2))), 0.0)


@settings(max_examples=50)
@given(arrays(float, 24, elements=st.floats(-1e3, 1e3)), arrays(float, 2, elements=st.floats(-2, 2)))
def test_tanh_law_is_admissible(w, x):
    u = feature_tanh(w, monomial_basis(8), make_oscillator_plant()).eval(x)
    assert np.all(np.abs(u) < 1.0)


@pytest.mark.parametrize("c", [0.5, -1.0, 2.0])
def test_linear_law_scalar_case(c):
    plant = make_linear_plant([[-1.0]], [[3.0]])
    ctrl = feature_linear([c], MonomialBasis([[2]]), plant)
    x = np.array([[0.7], [-0.2]])
    np.testing.assert_allclose(ctrl.eval(x)[:, 0], -2 * c * x[:, 0] * 3.0)


@pytest.mark.parametrize("make", [feature_tanh, feature_linear], ids=["tanh", "linear"])
def test_feature_law_jacobian(make, rng):
    basis = monomial_basis(6)
    ctrl = make(rng.normal(scale=0.5, size=basis.nf), basis, make_oscillator_plant())
    X = rng.uniform(-1, 1, size=(100, 2))
    assert relative_error(ctrl.jacobian(X), fd_jacobian(ctrl.eval, X)) < 1e-5


def test_simple_laws():
    X = np.array([[1.0, 2.0]])
    np.testing.assert_array_equal(ZeroController(2).eval(X), [[0.0]])
    np.testing.assert_array_equal(LinearController([[1.0, -1.0]]).eval(X), [[-1.0]])


def test_weights_csv_round_trip(tmp_path, rng):
    w = rng.normal(size=24)
    save_weights_csv(tmp_path / "w.csv", w)
    np.testing.assert_array_equal(load_weights_csv(tmp_path / "w.csv"), w)


def test_weight_length_checked():
    with pytest.raises(ValueError):
        feature_tanh(np.zeros(3), monomial_basis(8), make_oscillator_plant())
