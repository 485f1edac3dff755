"""Acceptance suite: one PASS/FAIL line per criterion, printed in the terminal summary.

Desk scale is two qubits (transverse-field Ising chain, J = 1, h = 0.5, Pauli
jumps, beta = 1) with a three-qubit spot check for the channel properties.
"""
import time

import numpy as np
import pytest

from qmetro.channel import CLASSES, channel_parts, jump_ensemble
from qmetro.hamiltonians import build_tfim, eigensystem, gibbs
from qmetro.lindblad import reassembly_error, spectral_gap
from qmetro.norms import trace_norm
from qmetro.qpe import energy_grid, fit_tail_rate, single_round_amplitudes, tail_mass
from qmetro.verify import (
    check_cptp,
    check_decomposition,
    check_degenerate_commuting,
    check_discrete_vs_continuous,
    check_end_to_end,
    check_fixed_point_distance,
    check_lindblad,
    check_mixing_bound,
    check_qpe,
    check_reference,
    check_residual_envelope,
    check_residual_monotone_g,
    check_residual_scaling,
    fit_residual_model,
    residual,
    check_uniform_error,
    check_uniqueness,
)

from conftest import ACCEPTANCE_LINES

BETA = 1.0


@pytest.fixture(scope="module")
def es():
    return eigensystem(build_tfim(2, 1.0, 0.5))


@pytest.fixture(scope="module")
def ens():
    return jump_ensemble("pauli", 2)


def parts_at(es, ens, r, g, beta=BETA):
    return channel_parts(es, energy_grid(r, es.kappa), g, ens, beta)


def record(number, title, results, limit, t0, extra=""):
    elapsed = time.time() - t0
    ok = all(r.passed for r in results) and elapsed < limit
    body = "; ".join(f"{r.name}={r.measured:.3g} (bound {r.bound:.3g}, {'ok' if r.passed else 'VIOLATED'})" for r in results)
    line = f"{'PASS' if ok else 'FAIL'} criterion {number:2d} {title}: {body}; {elapsed:.1f}s of {limit:.0f}s{extra}"
    ACCEPTANCE_LINES.append(line)
    print(line)
    return ok


def test_criterion_01_cptp(es, ens):
    t0 = time.time()
    results = check_cptp(parts_at(es, ens, 3, 3), taus=(0.05, 0.2))
    es3 = eigensystem(build_tfim(3, 1.0, 0.5))
    spot = check_cptp(parts_at(es3, jump_ensemble("pauli", 3), 3, 3), taus=(0.05, 0.2))
    for r in spot:
        r.name += "_n3"
    assert record(1, "completely positive and trace preserving", results + spot, 10, t0)


def test_criterion_02_decomposition(es, ens):
    t0 = time.time()
    parts = parts_at(es, ens, 3, 3)
    results = check_decomposition(parts, 0.05, restarts=512)
    results += [r for r in check_decomposition(parts, 0.2, restarts=512) if r.name == "expansion_residual"]
    assert record(2, "E = I + tau^2 L + tau^4 J with bounded L and J", results, 60, t0)


def test_criterion_03_reference_equals_fast(es, ens):
    t0 = time.time()
    grid = energy_grid(2, es.kappa)
    results = []
    for g in (1, 3):
        for tau in (0.05, 0.2):
            res = check_reference(es, grid, g, ens, BETA, tau)
            res.name += f"_tau{tau}"
            results.append(res)
    assert record(3, "register construction equals fast construction", results, 120, t0)


def test_criterion_04_lindblad_form(es, ens):
    t0 = time.time()
    parts = parts_at(es, ens, 3, 3)
    result = check_lindblad(parts)
    reassembly = reassembly_error(es, parts.grid, 3, ens, BETA)
    assert record(4, "jump-operator generator equals channel generator", [result], 30, t0, f"; reassembly={reassembly:.2g}")
    assert reassembly < 1e-9


def test_criterion_05_residual_scaling(es, ens):
    # Fails at desk scale; see the README section on known deviations.
    t0 = time.time()
    halving = check_residual_scaling(es, ens, BETA, g=5, rs=(3, 4, 5))
    monotone = check_residual_monotone_g(es, ens, BETA, r=5, gs=(1, 3, 5))
    envelope = check_residual_envelope(es, ens, BETA, g=5, rs=(3, 4, 5, 6))
    ratios = ", ".join(f"{q:.3f}" for q in halving.detail["ratios"])
    by_g = ", ".join(f"g={g}: {v:.3g}" for g, v in monotone.detail["residuals"].items())
    rows = [(r, g, BETA, es.kappa, residual(es, r, g, ens, BETA)) for r in (3, 4, 5, 6) for g in (1, 3, 5)]
    fit = fit_residual_model(rows, n=2)
    extra = (
        f"; ratios r->r+1 = [{ratios}]; r=5 residuals {by_g}; below 4 beta w: {envelope.passed}"
        f"; fitted a={fit['a']:.3g} b={fit['b']:.3g} c={fit['c']:.3g} (relative rms {fit['relative_rms']:.2f})"
    )
    assert record(5, "fixed-point residual halves in r and shrinks in g", [halving, monotone], 300, t0, extra)


def test_criterion_06_uniform_error(es, ens):
    t0 = time.time()
    result = check_uniform_error(es, energy_grid(3, es.kappa), 3, ens, BETA, outer=CLASSES)
    extra = f"; trace norm {result.detail['trace_norm']:.3g} vs 4 beta w = {result.detail['trace_norm_bound']:.3g}"
    assert record(6, "uniform-error identity", [result], 60, t0, extra)


def test_criterion_07_uniqueness_and_gap(es, ens):
    t0 = time.time()
    parts = parts_at(es, ens, 3, 3)
    results = [check_uniqueness(parts), check_degenerate_commuting(n=2, r=3, g=3, beta=BETA)]
    results.append(check_fixed_point_distance(parts, epsilon=0.01))
    # Z-only jumps with the transverse field on: reported, not asserted
    zL = parts_at(es, jump_ensemble("z", 2), 3, 3).generator()
    z_null = int(np.sum(np.abs(np.linalg.eigvals(zL.matrix)) < 1e-8))
    extra = f"; gap={results[0].measured:.3g}; Z-only jumps at h=0.5 give null dimension {z_null}"
    assert record(7, "unique full-rank fixed point, positive gap, distance bound", results, 60, t0, extra)


def test_criterion_08_discrete_vs_continuous(es, ens):
    t0 = time.time()
    result = check_discrete_vs_continuous(parts_at(es, ens, 3, 3), K=100, tau=0.05, restarts=512)
    assert record(8, "discrete iterations track continuous evolution", [result], 120, t0)


def test_criterion_09_mixing_bound(es, ens):
    t0 = time.time()
    results = check_mixing_bound(parts_at(es, ens, 3, 3), n_states=10, n_times=20, seed=0)
    assert record(9, "gap-based mixing bound", results, 60, t0)


def test_criterion_10_end_to_end(es, ens):
    t0 = time.time()
    parts = parts_at(es, ens, 5, 5)
    results = check_end_to_end(parts, tau=0.05, epsilon=0.01, target=0.05, n_traj=10_000, seed=0)
    rep = spectral_gap(parts.generator())
    fp = trace_norm(rep.fixed_point - gibbs(es, BETA).matrix)
    extra = f"; K={results[0].detail['K']}; ||rho_L - rho_beta||_1={fp:.3g}"
    assert record(10, "end-to-end sampling", results, 1800, t0, extra)


def test_criterion_11_qpe(es):
    t0 = time.time()
    results = check_qpe(es, n_points=10_000)
    table = single_round_amplitudes(es, energy_grid(4, es.kappa))
    gs = (1, 3, 5)
    tails = [float(tail_mass(table, g).max()) for g in gs]
    _, rate = fit_tail_rate(gs, tails)
    extra = f"; worst tail mass at r=4 for g=1,3,5: {', '.join(f'{x:.3g}' for x in tails)}; fitted rate per round {rate:.3f}"
    assert record(11, "phase-estimation amplitude properties", results, 60, t0, extra)
