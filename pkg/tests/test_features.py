import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from gradctl.checks import fd_jacobian, relative_error
from gradctl.features import (LogCoshBasis, load_matrix_csv, logcosh, logcosh_basis, monomial_basis,
                              monomial_exponents, sample_feature_matrix, save_matrix_csv)
from gradctl.plants import make_oscillator_plant


@pytest.mark.parametrize("order, nf", [(2, 3), (4, 8), (6, 15), (8, 24)])
def test_monomial_counts(order, nf):
    assert monomial_basis(order).nf == nf


@pytest.mark.parametrize("order", [0, 3, -2])
def test_monomial_order_validated(order):
    with pytest.raises(ValueError):
        monomial_exponents(order)


def test_monomial_exponents_have_even_degree():
    E = monomial_exponents(8)
    assert set(E.sum(axis=1)) == {2, 4, 6, 8}


def test_monomials_on_first_axis():
    basis = monomial_basis(6)
    theta = basis.eval(np.array([1.0, 0.0]))
    pure = [i for i, e in enumerate(basis.exponents) if e[1] == 0]
    assert sorted(basis.exponents[pure, 0]) == [2, 4, 6]
    expected = np.zeros(basis.nf)
    expected[pure] = 1.0
    np.testing.assert_array_equal(theta, expected)


def test_logcosh_zero_at_origin():
    basis = logcosh_basis(sample_feature_matrix(7, 2, 5.0, np.random.default_rng(0)))
    np.testing.assert_array_equal(basis.eval(np.zeros(2)), np.zeros(7))
    np.testing.assert_array_equal(basis.jacobian(np.zeros(2)), np.zeros((7, 2)))


def test_logcosh_scalar_value():
    assert logcosh_basis([[1.0, 0.0]]).eval(np.array([0.5, 0.0]))[0] == pytest.approx(0.12011450695827745, abs=1e-14)


@given(st.floats(-800, 800, allow_nan=False))
def test_logcosh_is_stable(z):
    v = logcosh(np.array(z))
    assert np.isfinite(v) and v >= 0
    if abs(z) < 20:
        assert v == pytest.approx(np.log(np.cosh(z)), rel=1e-12, abs=1e-15)


@pytest.mark.parametrize("basis", [monomial_basis(8), logcosh_basis(
    sample_feature_matrix(30, 2, 5.0, np.random.default_rng(3)))], ids=["monomial", "logcosh"])
def test_basis_derivatives_match_differences(basis, rng):
    X = rng.uniform(-1, 1, size=(100, 2))
    assert relative_error(basis.jacobian(X), fd_jacobian(basis.eval, X)) < 1e-6
    assert relative_error(basis.hessian(X), fd_jacobian(basis.jacobian, X)) < 1e-6


def test_fast_contraction_matches_generic(rng):
    basis = logcosh_basis(sample_feature_matrix(10, 2, 5.0, rng))
    plant = make_oscillator_plant()
    X = rng.uniform(-1, 1, size=(20, 2))
    generic = np.einsum("bkij,bi->bkj", basis.hessian(X), plant.input_matrix(X)[:, :, 0])
    np.testing.assert_allclose(basis.g_hessian_contraction(X, plant), generic, atol=1e-12)


def test_feature_matrix_sampling_contract():
    a = sample_feature_matrix(50, 2, 5.0, np.random.default_rng(4))
    b = sample_feature_matrix(50, 2, 5.0, np.random.default_rng(4))
    c = sample_feature_matrix(50, 2, 5.0, np.random.default_rng(5))
    assert a.shape == (50, 2) and np.all(np.abs(a) <= 5.0)
    np.testing.assert_array_equal(a, b)
    assert np.any(a != c)


def test_matrix_csv_round_trip(tmp_path, rng):
    W = rng.normal(size=(6, 2))
    save_matrix_csv(tmp_path / "W.csv", W)
    np.testing.assert_array_equal(load_matrix_csv(tmp_path / "W.csv"), W)
    assert isinstance(logcosh_basis(W), LogCoshBasis)
