import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from qmetro.errors import DomainError, PrecisionError, SizeError, ValidationError
from qmetro.hamiltonians import (
    HermitianOperator,
    build_random_local,
    build_tfim,
    eigensystem,
    gibbs,
    pauli_string,
    smallest_power_of_two_above,
    truncated_gibbs,
)
from qmetro.qpe import energy_grid


def test_single_qubit_field_spectrum():
    es = eigensystem(build_tfim(1, 0.0, 1.0))
    np.testing.assert_allclose(es.energies, [0.0, 2.0], atol=1e-12)
    assert es.kappa == 4.0


def test_two_site_tfim_spectrum_closed_form():
    # ZZ + h(X1 + X2): singlet -1, antisymmetric triplet +1, 2x2 block +-sqrt(1 + 4h^2)
    h = 0.5
    s = math.sqrt(1 + 4 * h * h)
    expected = np.sort([-1.0, 1.0, -s, s]) + s
    es = eigensystem(build_tfim(2, 1.0, h))
    np.testing.assert_allclose(es.energies, expected, atol=1e-12)
    assert es.kappa == 4.0


def test_eigenbasis_round_trip(tfim2):
    H = build_tfim(2).matrix
    D = tfim2.to_eigenbasis(H)
    np.testing.assert_allclose(D, np.diag(tfim2.energies), atol=1e-12)
    np.testing.assert_allclose(tfim2.from_eigenbasis(D), H, atol=1e-12)


def test_kappa_is_strictly_above_max_energy():
    assert smallest_power_of_two_above(0.0) == 1.0
    assert smallest_power_of_two_above(2.0) == 4.0
    assert smallest_power_of_two_above(2.5) == 4.0
    assert smallest_power_of_two_above(0.3) == 1.0


def test_random_local_is_reproducible_and_shifted():
    a = build_random_local(2, 2, seed=3).matrix
    b = build_random_local(2, 2, seed=3).matrix
    c = build_random_local(2, 2, seed=4).matrix
    np.testing.assert_array_equal(a, b)
    assert np.max(np.abs(a - c)) > 0.1
    assert abs(np.linalg.eigvalsh(a)[0]) < 1e-12


def test_random_local_respects_locality():
    H = build_random_local(3, 1, seed=0).matrix
    # weight-1 terms only: no overlap with any weight-2 Pauli string
    assert abs(np.trace(pauli_string("XZI").conj().T @ H)) < 1e-12
    assert abs(np.trace(pauli_string("XII").conj().T @ H)) > 1e-6


def test_rejects_bad_inputs():
    with pytest.raises(SizeError):
        build_tfim(7)
    with pytest.raises(ValidationError):
        HermitianOperator(np.array([[0, 1], [0, 0]]))
    with pytest.raises(ValidationError):
        HermitianOperator(np.eye(3))
    with pytest.raises(ValidationError):
        eigensystem(-np.eye(2))
    with pytest.raises(DomainError):
        build_random_local(2, 3, 0)
    with pytest.raises(DomainError):
        gibbs(eigensystem(build_tfim(1)), -1.0)


@given(st.floats(0.0, 5.0))
def test_gibbs_is_a_state(beta):
    es = eigensystem(build_tfim(2))
    rho = gibbs(es, beta).matrix
    assert abs(np.trace(rho) - 1) < 1e-12
    np.testing.assert_allclose(rho, rho.conj().T, atol=1e-14)
    assert np.linalg.eigvalsh(rho)[0] > 0


def test_gibbs_infinite_temperature_is_maximally_mixed(tfim2):
    np.testing.assert_allclose(gibbs(tfim2, 0.0).matrix, np.eye(4) / 4, atol=1e-14)


def test_truncated_gibbs(tfim2):
    grid = energy_grid(3, tfim2.kappa)
    rho0 = truncated_gibbs(tfim2, 1.0, grid)
    floored = np.floor(tfim2.energies / grid.spacing) * grid.spacing
    Z = np.exp(-tfim2.energies).sum()
    np.testing.assert_allclose(rho0.probabilities, np.exp(-floored) / Z, atol=1e-14)
    with pytest.raises(PrecisionError):
        truncated_gibbs(tfim2, 1.0, energy_grid(2, tfim2.kappa))
