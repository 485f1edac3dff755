import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from qmetro.errors import ValidationError
from qmetro.superop import Superoperator, unvec, vec


def rand_matrix(rng, d):
    return rng.normal(size=(d, d)) + 1j * rng.normal(size=(d, d))


def test_vec_is_column_stacking():
    X = np.array([[1, 2], [3, 4]])
    np.testing.assert_array_equal(vec(X), [1, 3, 2, 4])
    np.testing.assert_array_equal(unvec(vec(X)), X)


@given(st.integers(0, 10_000), st.integers(1, 4))
def test_left_right_matches_products(seed, d):
    rng = np.random.default_rng(seed)
    A, X, B = (rand_matrix(rng, d) for _ in range(3))
    np.testing.assert_allclose(Superoperator.left_right(A, B).apply(X), A @ X @ B, atol=1e-10)


@given(st.integers(0, 10_000))
def test_kraus_round_trip(seed):
    rng = np.random.default_rng(seed)
    K = np.array([rand_matrix(rng, 3) for _ in range(4)])
    S = Superoperator.from_kraus(K)
    X = rand_matrix(rng, 3)
    np.testing.assert_allclose(S.apply(X), sum(k @ X @ k.conj().T for k in K), atol=1e-10)
    np.testing.assert_allclose(Superoperator.from_kraus(S.kraus(1e-12)).matrix, S.matrix, atol=1e-9)


def test_choi_of_identity_is_max_entangled():
    C = Superoperator.identity(2).choi()
    omega = np.zeros(4)
    omega[[0, 3]] = 1
    np.testing.assert_allclose(C, np.outer(omega, omega), atol=0)


def test_unitary_channel_is_cptp():
    U = np.linalg.qr(np.random.default_rng(1).normal(size=(4, 4)))[0]
    S = Superoperator.from_kraus(U)
    assert S.trace_preservation_error() < 1e-12
    assert S.choi_min_eigenvalue() > -1e-12
    assert (Superoperator.identity(4) * 2.0).trace_preservation_error() > 0.5


def test_adjoint_and_basis_change():
    rng = np.random.default_rng(2)
    S = Superoperator.from_kraus(rand_matrix(rng, 2))
    X, Y = rand_matrix(rng, 2), rand_matrix(rng, 2)
    lhs = np.trace(Y.conj().T @ S.apply(X))
    rhs = np.trace(S.adjoint().apply(Y).conj().T @ X)
    assert abs(lhs - rhs) < 1e-10
    V = np.linalg.qr(rand_matrix(rng, 2))[0]
    T = S.change_basis(V)
    np.testing.assert_allclose(T.apply(X), V @ S.apply(V.conj().T @ X @ V) @ V.conj().T, atol=1e-10)


def test_algebra():
    I = Superoperator.identity(2)
    assert (I @ I - I).max_abs_diff(Superoperator(np.zeros((4, 4)))) == 0
    assert (-I + I * 2).max_abs_diff(I) == 0
    assert (I * 3).power(2).max_abs_diff(I * 9) == 0
    with pytest.raises(ValidationError):
        Superoperator(np.zeros((3, 3)))
