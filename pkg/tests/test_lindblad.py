import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from qmetro.channel import channel_parts, jump_ensemble
from qmetro.errors import DomainError, UniquenessError
from qmetro.hamiltonians import build_random_local, build_tfim, eigensystem
from qmetro.lindblad import (
    LindbladSet,
    evolve,
    fixed_point,
    lindblad_operators,
    mixing_bound,
    mixing_time_estimate,
    propagator,
    reassembly_error,
    sigma_dual,
    spectral_gap,
)
from qmetro.norms import trace_norm
from qmetro.qpe import energy_grid

from conftest import random_density

LOWER = np.array([[0, 1], [0, 0]], dtype=complex)


def thermal_qubit(down, up):
    return LindbladSet(np.array([math.sqrt(down) * LOWER, math.sqrt(up) * LOWER.T]))


def test_thermal_qubit_oracle():
    down, up = 1.3, 0.4
    L = thermal_qubit(down, up).generator()
    np.testing.assert_allclose(fixed_point(L), np.diag([down, up]) / (down + up), atol=1e-12)
    ev = np.sort(np.linalg.eigvals(L.matrix).real)
    np.testing.assert_allclose(ev, [-(down + up), -(down + up) / 2, -(down + up) / 2, 0], atol=1e-12)
    # detailed balance: the symmetrised gap equals the coherence decay rate
    assert abs(spectral_gap(L).gap - (down + up) / 2) < 1e-12


def test_amplitude_damping_fixed_point():
    L = thermal_qubit(1.0, 0.0).generator()
    np.testing.assert_allclose(fixed_point(L), np.diag([1.0, 0.0]), atol=1e-12)


def test_sigma_dual_is_trace_dual():
    L = thermal_qubit(1.0, 0.5).generator()
    sigma = np.linalg.inv(fixed_point(L))
    D = sigma_dual(L, sigma)
    w, u = np.linalg.eigh(sigma)
    half = (u * np.sqrt(w)) @ u.conj().T

    def inner(M, N):
        return np.trace(half @ M.conj().T @ half @ N)

    rng = np.random.default_rng(0)
    M, N = random_density(2, rng), random_density(2, rng) + 0.3j * np.eye(2)
    assert abs(inner(M, L.apply(N)) - inner(D.apply(M), N)) < 1e-12


@pytest.mark.parametrize("r,g", [(2, 1), (2, 3)])
def test_lindblad_form_matches_channel(tfim2, pauli2, r, g):
    grid = energy_grid(r, tfim2.kappa)
    L = channel_parts(tfim2, grid, g, pauli2, 1.0).generator()
    V = lindblad_operators(tfim2, grid, g, pauli2, 1.0)
    assert V.generator().max_abs_diff(L) < 1e-12
    raw = lindblad_operators(tfim2, grid, g, pauli2, 1.0, raw=True)
    assert raw.generator().max_abs_diff(L) < 1e-12
    assert len(V) <= len(raw)
    assert reassembly_error(tfim2, grid, g, pauli2, 1.0) < 1e-12


def test_unique_full_rank_fixed_point(parts_r3g3):
    rep = spectral_gap(parts_r3g3.generator())
    assert rep.gap > 0
    assert np.linalg.eigvalsh(rep.fixed_point)[0] > 0
    assert abs(np.trace(rep.fixed_point) - 1) < 1e-12
    np.testing.assert_allclose(rep.sigma @ rep.fixed_point, np.eye(4), atol=1e-9)


def test_commuting_jumps_degenerate():
    es = eigensystem(build_tfim(2, 1.0, 0.0))
    L = channel_parts(es, energy_grid(3, es.kappa), 3, jump_ensemble("z", 2), 1.0).generator()
    with pytest.raises(UniquenessError):
        fixed_point(L)


def test_evolution(parts_r3g3):
    L = parts_r3g3.generator()
    rep = spectral_gap(L)
    rho = np.diag([1.0, 0, 0, 0]).astype(complex)
    np.testing.assert_allclose(evolve(L, 0.0, rho), rho, atol=1e-14)
    np.testing.assert_allclose(evolve(L, 200.0, rho), rep.fixed_point, atol=1e-9)
    with pytest.raises(DomainError):
        propagator(L, -1.0)
    for t in (0.0, 0.5, 2.0, 5.0):
        assert trace_norm(evolve(L, t, rho) - rep.fixed_point) <= mixing_bound(rep, rho, t) + 1e-12


def test_mixing_time_estimate(parts_r3g3):
    L = parts_r3g3.generator()
    est = mixing_time_estimate(L, 0.01)
    assert 0 < est.t_mix <= est.analytic_bound
    rep = spectral_gap(L)
    assert trace_norm(evolve(L, est.t_mix, est.worst_state) - rep.fixed_point) <= 0.01 + 1e-9
    with pytest.raises(DomainError):
        mixing_time_estimate(L, 0.0)


def test_infinite_temperature_mixing_matches_gap(tfim2, pauli2):
    # at beta = 0 the pure-state distance decays as 2 (1 - 1/d) exp(-gap t)
    L = channel_parts(tfim2, energy_grid(3, tfim2.kappa), 3, pauli2, 0.0).generator()
    rep = spectral_gap(L)
    np.testing.assert_allclose(rep.fixed_point, np.eye(4) / 4, atol=1e-12)
    est = mixing_time_estimate(L, 0.01, rep)
    predicted = math.log(2 * (1 - 1 / 4) / 0.01) / rep.gap
    assert abs(est.t_mix - predicted) / predicted < 2e-3


@given(st.integers(0, 200), st.floats(0.0, 3.0), st.sampled_from([(1, 1), (2, 3), (3, 1)]))
def test_lindblad_form_property(seed, beta, rg):
    r, g = rg
    es = eigensystem(build_random_local(1, 1, seed))
    ens = jump_ensemble("pauli", 1)
    grid = energy_grid(r, es.kappa)
    L = channel_parts(es, grid, g, ens, beta).generator()
    V = lindblad_operators(es, grid, g, ens, beta)
    assert V.generator().max_abs_diff(L) < 1e-12
    out = L.apply(np.eye(2) / 2 + 0.1j * np.array([[0, 1], [-1, 0]]))
    assert abs(np.trace(out)) < 1e-13
