"""Numerical checks of the sampler's structural properties and error bounds.

Every check returns a ``CheckResult``.  ``run_all`` assembles the battery for an
``ExperimentConfig``; the acceptance tests call the same functions with their
own parameters.
"""
from __future__ import annotations

import itertools
import json
import math
import time
from dataclasses import asdict, dataclass, field

import numpy as np
from scipy.linalg import expm
from scipy.optimize import nnls

from . import __version__
from .channel import (
    ChannelParts,
    channel_parts,
    jump_ensemble,
    projected_accept,
    projected_rate,
)
from .errors import UniquenessError
from .hamiltonians import build_tfim, eigensystem, gibbs, truncated_gibbs
from .lindblad import fixed_point, lindblad_operators, mixing_bound, mixing_time_estimate, spectral_gap
from .norms import induced_norm_estimate, sigma_inner, trace_norm
from .qpe import energy_grid, gram_family, neighbour_probability, single_round_amplitudes
from .registers import build_reference_channel
from .superop import Superoperator
from .trajectory import KrausSampler, bootstrap_sigma, empirical_state, run_ensemble


@dataclass
class CheckResult:
    name: str
    anchor: str  # the property being tested, in words
    measured: float
    bound: float
    tol: float
    passed: bool
    seconds: float
    detail: dict = field(default_factory=dict)

    def line(self) -> str:
        status = "PASS" if self.passed else "FAIL"
        return f"{status} {self.name}: measured={self.measured:.6g} bound={self.bound:.6g} ({self.seconds:.2f}s)"


def _result(name, anchor, measured, bound, tol, passed, t0, **detail):
    return CheckResult(name, anchor, float(measured), float(bound), float(tol), bool(passed), time.time() - t0, detail)


def _jsonable(x):
    if isinstance(x, dict):
        return {k: _jsonable(v) for k, v in x.items()}
    if isinstance(x, (list, tuple)):
        return [_jsonable(v) for v in x]
    if isinstance(x, np.ndarray):
        return _jsonable(x.tolist())
    if isinstance(x, (np.floating, np.integer, np.bool_)):
        return x.item()
    if isinstance(x, complex):
        return [x.real, x.imag]
    return x


# --- channel structure ---------------------------------------------------------------


def check_cptp(parts: ChannelParts, taus=(0.05, 0.2), tp_tol=1e-10, choi_tol=1e-9) -> list[CheckResult]:
    t0 = time.time()
    tp, choi = 0.0, np.inf
    for tau in taus:
        E = parts.at(tau).E_tau
        tp = max(tp, E.trace_preservation_error())
        choi = min(choi, E.choi_min_eigenvalue())
    return [
        _result("trace_preservation", "one iteration preserves trace", tp, tp_tol, tp_tol, tp <= tp_tol, t0, taus=taus),
        _result(
            "complete_positivity",
            "one iteration is completely positive (Choi matrix PSD)",
            choi,
            -choi_tol,
            choi_tol,
            choi >= -choi_tol,
            t0,
            taus=taus,
        ),
    ]


def check_decomposition(parts: ChannelParts, tau: float, tol=1e-10, restarts=512) -> list[CheckResult]:
    """Assemble E branch by branch and compare with I + tau^2 L + tau^4 J; bound ||L||, ||J||."""
    t0 = time.time()
    d = parts.dim
    E = np.zeros((d * d, d * d), dtype=complex)
    for c, mu in enumerate(parts.ensemble.weights):
        for flipped in (False, True):
            for S in parts.branches(tau, c, flipped).values():
                E += 0.5 * mu * S.matrix
    L, J = parts.generator(), parts.second_order()
    resid = float(np.max(np.abs(E - np.eye(d * d) - tau**2 * L.matrix - tau**4 * J.matrix)))
    out = [_result("expansion_residual", "channel equals I + tau^2 L + tau^4 J", resid, tol, tol, resid <= tol, t0)]
    t0 = time.time()
    nL = induced_norm_estimate(L, restarts=restarts).value
    out.append(_result("generator_norm", "induced trace norm of L is at most 4", nL, 4.0, 0, nL <= 4.0, t0))
    t0 = time.time()
    nJ = induced_norm_estimate(J, restarts=restarts).value
    out.append(_result("fourth_order_norm", "induced trace norm of J is at most 4", nJ, 4.0, 0, nJ <= 4.0, t0))
    return out


def check_reference(es, grid, g, ensemble, beta, tau, tol=1e-9) -> CheckResult:
    t0 = time.time()
    ref = build_reference_channel(es, grid, g, ensemble, beta, tau)
    fast = channel_parts(es, grid, g, ensemble, beta).at(tau)
    diff = ref.E_tau.max_abs_diff(fast.E_tau)
    return _result(
        f"reference_vs_fast_r{grid.r}_g{g}",
        "register-level channel equals the Gram-family channel",
        diff,
        tol,
        tol,
        diff <= tol,
        t0,
        kraus_completeness=ref.kraus_completeness,
    )


def check_lindblad(parts: ChannelParts, tol=1e-9) -> CheckResult:
    t0 = time.time()
    ops = lindblad_operators(parts.es, parts.grid, parts.g, parts.ensemble, parts.beta)
    diff = ops.generator().max_abs_diff(parts.generator())
    return _result(
        "lindblad_form", "jump-operator form reproduces the generator", diff, tol, tol, diff <= tol, t0, n_ops=len(ops)
    )


# --- fixed point accuracy ------------------------------------------------------------


def residual(es, r, g, ensemble, beta) -> float:
    L = channel_parts(es, energy_grid(r, es.kappa), g, ensemble, beta).generator()
    return trace_norm(L.apply(gibbs(es, beta).matrix))


def check_residual_scaling(es, ensemble, beta=1.0, g=5, rs=(3, 4, 5), lo=0.4, hi=0.6) -> CheckResult:
    """||L(rho_beta)||_1 should roughly halve with each extra ancilla qubit."""
    t0 = time.time()
    vals = {r: residual(es, r, g, ensemble, beta) for r in list(rs) + [max(rs) + 1]}
    ratios = [vals[r + 1] / vals[r] for r in rs]
    worst = max(ratios, key=lambda q: max(lo - q, q - hi))
    ok = all(lo <= q <= hi for q in ratios)
    return _result(
        "residual_halving_in_r",
        f"residual ratio between consecutive r lies in [{lo}, {hi}]",
        worst,
        hi,
        0,
        ok,
        t0,
        residuals=vals,
        ratios=ratios,
    )


def check_residual_monotone_g(es, ensemble, beta=1.0, r=5, gs=(1, 3, 5)) -> CheckResult:
    t0 = time.time()
    vals = [residual(es, r, g, ensemble, beta) for g in gs]
    steps = np.diff(vals)
    return _result(
        "residual_nonincreasing_in_g",
        "residual does not grow with more boosting rounds",
        float(steps.max()),
        0.0,
        0,
        bool(np.all(steps <= 1e-15)),
        t0,
        residuals=dict(zip(gs, vals)),
    )


def check_residual_envelope(es, ensemble, beta=1.0, g=5, rs=(3, 4, 5, 6)) -> CheckResult:
    """Residual stays below 4 beta w (the size of the uniform-error term) at each r."""
    t0 = time.time()
    rows = {r: (residual(es, r, g, ensemble, beta), 4 * beta * energy_grid(r, es.kappa).spacing) for r in rs}
    worst = max(v / b for v, b in rows.values())
    return _result(
        "residual_below_4_beta_w", "residual is at most 4 beta w", worst, 1.0, 0, worst <= 1.0, t0, rows=rows
    )


def fit_residual_model(rows, n: int):
    """Fit residual ~ a 2^(-c g + 2n) + b beta kappa 2^-r over rows (r, g, beta, kappa, residual).

    c is scanned on a grid; a, b >= 0 come from non-negative least squares in
    relative (log-weighted) error.
    """
    rows = np.asarray(rows, dtype=float)
    r, g, beta, kappa, y = rows.T
    best = None
    for c in np.linspace(0.05, 3.0, 60):
        A = np.stack([2.0 ** (-c * g + 2 * n), beta * kappa * 2.0**-r], axis=1) / y[:, None]
        coef, res = nnls(A, np.ones_like(y))
        if best is None or res < best[0]:
            best = (res, coef[0], coef[1], c)
    res, a, b, c = best
    return {"a": float(a), "b": float(b), "c": float(c), "relative_rms": float(res / math.sqrt(len(y)))}


def check_uniform_error(es, grid, g, ensemble, beta, tol=1e-10, outer=("all",)) -> CheckResult:
    """(M_a - M_rr)(rho_0) = (1 - e^{beta (s - v) w}) M_a(rho_0) for median classes v, s in {floor, ceil}."""
    t0 = time.time()
    rho0 = truncated_gibbs(es, beta, grid).matrix
    w = grid.spacing
    worst, tn = 0.0, 0.0
    names = ("floor", "ceil")
    for A, Y in itertools.product(outer, outer):
        for v, s in itertools.product((0, 1), (0, 1)):
            Ma = projected_accept(es, grid, g, ensemble, beta, A, names[v], names[s], Y).apply(rho0)
            D = projected_rate(es, grid, g, ensemble, beta, A, names[v], names[s], Y)
            lhs = Ma - D @ rho0
            rhs = (1 - math.exp(beta * (s - v) * w)) * Ma
            worst = max(worst, float(np.max(np.abs(lhs - rhs))))
            tn = max(tn, trace_norm(lhs))
    ok = worst <= tol and tn <= 4 * beta * w
    return _result(
        "uniform_error_identity",
        "class-projected accept minus reject equals (1 - e^{beta (s-v) w}) times accept",
        worst,
        tol,
        tol,
        ok,
        t0,
        trace_norm=tn,
        trace_norm_bound=4 * beta * w,
    )


# --- uniqueness, gap, mixing ------------------------------------------------------


def check_uniqueness(parts: ChannelParts) -> CheckResult:
    t0 = time.time()
    L = parts.generator()
    ev = np.linalg.eigvals(L.matrix)
    null = int(np.sum(np.abs(ev) < 1e-8))
    try:
        rep = spectral_gap(L)
        lam_min = float(np.linalg.eigvalsh(rep.fixed_point)[0])
        gap = rep.gap
    except UniquenessError:
        lam_min, gap = 0.0, 0.0
    ok = null == 1 and lam_min > 0 and gap > 0
    return _result(
        "unique_fixed_point",
        "full-algebra jumps give a unique full-rank fixed point and positive gap",
        gap,
        0.0,
        0,
        ok,
        t0,
        null_dimension=null,
        min_fixed_point_eigenvalue=lam_min,
        algebra_dimension=parts.ensemble.algebra_dimension(),
    )


def check_degenerate_commuting(n=2, r=3, g=3, beta=1.0) -> CheckResult:
    """Z-only jumps on the classical (h = 0) Ising chain commute with everything: null space is degenerate."""
    t0 = time.time()
    es = eigensystem(build_tfim(n, 1.0, 0.0))
    parts = channel_parts(es, energy_grid(r, es.kappa), g, jump_ensemble("z", n), beta)
    L = parts.generator()
    null = int(np.sum(np.abs(np.linalg.eigvals(L.matrix)) < 1e-8))
    raised = False
    try:
        fixed_point(L)
    except UniquenessError:
        raised = True
    return _result(
        "degenerate_without_full_algebra",
        "commuting jumps leave a degenerate null space and the uniqueness test rejects it",
        null,
        1,
        0,
        raised and null > 1,
        t0,
        algebra_dimension=parts.ensemble.algebra_dimension(),
    )


def check_fixed_point_distance(parts: ChannelParts, epsilon=0.01) -> CheckResult:
    """||rho_L - rho_beta||_1 <= epsilon + ||L(rho_beta)||_1 t_mix(epsilon)."""
    t0 = time.time()
    L = parts.generator()
    rep = spectral_gap(L)
    rb = gibbs(parts.es, parts.beta).matrix
    res = trace_norm(L.apply(rb))
    est = mixing_time_estimate(L, epsilon, rep)
    dist = trace_norm(rep.fixed_point - rb)
    bound = epsilon + res * est.t_mix
    return _result(
        "fixed_point_distance",
        "distance of the fixed point to the Gibbs state is controlled by residual times mixing time",
        dist,
        bound,
        0,
        dist <= bound,
        t0,
        residual=res,
        t_mix=est.t_mix,
        gap=rep.gap,
    )


def check_mixing_time(parts: ChannelParts, epsilon=0.01) -> CheckResult:
    t0 = time.time()
    L = parts.generator()
    est = mixing_time_estimate(L, epsilon)
    return _result(
        "mixing_time_vs_gap_bound",
        "empirical mixing time does not exceed the gap-based bound",
        est.t_mix,
        est.analytic_bound,
        0,
        est.t_mix <= est.analytic_bound,
        t0,
    )


def check_discrete_vs_continuous(parts: ChannelParts, K=100, tau=0.05, restarts=512) -> CheckResult:
    t0 = time.time()
    E = parts.at(tau).E_tau
    L = parts.generator()
    D = Superoperator(np.linalg.matrix_power(E.matrix, K) - expm(K * tau**2 * L.matrix))
    val = induced_norm_estimate(D, restarts=restarts).value
    bound = 2 * math.e**4 * K * tau**4
    return _result(
        "discrete_vs_continuous",
        "K iterations stay within 2 e^4 K tau^4 of the continuous evolution",
        val,
        bound,
        0,
        val <= bound,
        t0,
        K=K,
        tau=tau,
    )


def check_mixing_bound(parts: ChannelParts, n_states=10, n_times=20, seed=0) -> list[CheckResult]:
    """Gap-based decay bound in trace norm and sigma-norm decay, on random states and times."""
    t0 = time.time()
    L = parts.generator()
    rep = spectral_gap(L)
    rng = np.random.Generator(np.random.Philox(seed))
    d = parts.dim
    times = np.linspace(0, 5 / rep.gap, n_times)
    worst_tn, worst_sig = -np.inf, -np.inf
    for _ in range(n_states):
        v = rng.normal(size=(d, d)) + 1j * rng.normal(size=(d, d))
        rho = v @ v.conj().T
        rho /= np.trace(rho)
        h0 = rho - rep.fixed_point
        s0 = sigma_inner(h0, h0, rep.sigma).real
        for t in times:
            rt = Superoperator(expm(t * L.matrix)).apply(rho)
            ht = rt - rep.fixed_point
            lhs = trace_norm(ht)
            worst_tn = max(worst_tn, lhs - mixing_bound(rep, rho, t))
            worst_sig = max(worst_sig, sigma_inner(ht, ht, rep.sigma).real - s0 * math.exp(-2 * rep.gap * t))
    tol = 1e-10
    return [
        _result(
            "mixing_bound",
            "||e^{tL} rho - rho_L||_1 <= 2^{n/2} sqrt(tr(s rho s rho)) e^{-gap t}",
            worst_tn,
            0.0,
            tol,
            worst_tn <= tol,
            t0,
        ),
        _result(
            "sigma_norm_decay",
            "sigma-norm of the deviation decays at least like e^{-2 gap t}",
            worst_sig,
            0.0,
            tol,
            worst_sig <= tol,
            t0,
        ),
    ]


def check_end_to_end(parts: ChannelParts, tau=0.05, epsilon=0.01, target=0.05, n_traj=10_000, seed=0):
    """Exact K-step state against the Gibbs state, and trajectories against the exact state."""
    t0 = time.time()
    L = parts.generator()
    est = mixing_time_estimate(L, epsilon)
    K = int(math.ceil(est.t_mix / tau**2))
    d = parts.dim
    psi = np.zeros(d, dtype=complex)
    psi[0] = 1
    rho = np.outer(psi, psi.conj())
    EK = parts.at(tau).E_tau.power(K)
    exact = EK.apply(rho)
    dist = trace_norm(exact - gibbs(parts.es, parts.beta).matrix)
    out = [
        _result(
            "end_to_end_distance",
            "K = t_mix / tau^2 iterations land near the Gibbs state",
            dist,
            target,
            0,
            dist <= target,
            t0,
            K=K,
            t_mix=est.t_mix,
        )
    ]
    if n_traj:
        t0 = time.time()
        ens = run_ensemble(KrausSampler(parts, tau), psi, K, n_traj, seed)
        emp = empirical_state(ens.states)
        sig = bootstrap_sigma(ens.states, seed=seed)
        td = trace_norm(emp - exact)
        out.append(
            _result(
                "trajectories_vs_exact",
                "trajectory average reproduces the exact K-step state within 3 bootstrap sigma",
                td,
                3 * sig,
                0,
                td <= 3 * sig,
                t0,
                K=K,
                n_traj=n_traj,
                cases=ens.case_counts,
            )
        )
    return out


# --- phase estimation ---------------------------------------------------------------


def check_qpe(es, r_values=(1, 2, 3, 4, 5, 6, 8), n_points=10_000, tol=1e-10) -> list[CheckResult]:
    t0 = time.time()
    theta = np.arange(n_points) / n_points
    mins = {r: float(neighbour_probability(theta, r).min()) for r in r_values}
    worst = min(mins.values())
    out = [
        _result(
            "neighbour_mass",
            "a single round puts at least 0.8 of its weight on the two nearest grid points",
            worst,
            0.8,
            0,
            worst >= 0.8,
            t0,
            minima=mins,
        )
    ]
    t0 = time.time()
    err = 0.0
    for r, g in ((2, 1), (2, 3), (3, 3), (3, 5)):
        table = single_round_amplitudes(es, energy_grid(r, es.kappa))
        err = max(err, float(np.max(np.abs(table.gamma.sum(axis=1) - 1))))
        G = gram_family(table, g).by_median
        err = max(err, float(np.max(np.abs(np.einsum("mjj->j", G) - 1))))
    out.append(_result("qpe_normalisation", "amplitudes sum to one and median masses sum to one", err, tol, tol, err <= tol, t0))
    t0 = time.time()
    table = single_round_amplitudes(es, energy_grid(2, es.kappa))
    diff = 0.0
    for flipped in (False, True):
        a = gram_family(table, 3, flipped, "dp").by_median
        b = gram_family(table, 3, flipped, "enumerate").by_median
        diff = max(diff, float(np.max(np.abs(a - b))))
    out.append(_result("gram_dp_vs_enumeration", "order-statistics Gram family equals enumeration", diff, tol, tol, diff <= tol, t0))
    return out


# --- battery -------------------------------------------------------------------------


def run_all(config, quick: bool = True) -> list[CheckResult]:
    """Run the battery at the configuration's parameters.

    ``quick`` keeps the end-to-end check deterministic-only (no trajectories)
    and uses fewer random restarts for induced norms.
    """
    es = config.eigensystem()
    ens = config.ensemble()
    parts = config.parts()
    restarts = 64 if quick else 512
    results = []
    results += check_cptp(parts, taus=sorted({config.tau, 0.05, 0.2}))
    results += check_decomposition(parts, config.tau, restarts=restarts)
    r_ref = min(config.r, 2)
    g_ref = config.g if r_ref * config.g <= 6 else 1
    results.append(check_reference(es, energy_grid(r_ref, es.kappa), g_ref, ens, config.beta, config.tau))
    results.append(check_lindblad(parts))
    if config.precise:
        results.append(check_uniform_error(es, parts.grid, config.g, ens, config.beta))
    unique = check_uniqueness(parts)
    results.append(unique)
    if unique.passed:
        results.append(check_fixed_point_distance(parts, config.epsilon))
        results.append(check_mixing_time(parts, config.epsilon))
        results += check_mixing_bound(parts, seed=config.seed)
        results.append(check_discrete_vs_continuous(parts, restarts=restarts))
    results += check_qpe(es)
    return results


def report_json(results, config=None) -> str:
    payload = {
        "version": __version__,
        "config": config.to_dict() if config is not None else None,
        "warnings": list(config.warnings) if config is not None else [],
        "checks": [asdict(r) for r in results],
        "passed": all(r.passed for r in results),
    }
    return json.dumps(_jsonable(payload), indent=2)
