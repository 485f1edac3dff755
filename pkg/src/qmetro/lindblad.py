"""The continuous-time generator: jump operators, fixed point, spectral gap and mixing time."""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.linalg import expm

from .channel import FLIPS, JumpEnsemble, acceptance_matrix
from .errors import ConditioningError, DomainError, UniquenessError
from .hamiltonians import EigenSystem
from .norms import matrix_power_psd, trace_norm
from .qpe import EnergyGrid, gram_family, outcome_tuples, single_round_amplitudes
from .superop import Superoperator, unvec, vec

NULL_TOL = 1e-8
GRAM_CUTOFF = 1e-15


@dataclass(frozen=True)
class LindbladSet:
    """Jump operators ``V`` of a generator ``sum_V V rho V^dag - 1/2 {V^dag V, rho}``.

    Written with the conventional 1/2, each ``V`` equals ``sqrt(mu(C) f)`` times
    a filtered jump; both orientations of the phase estimate appear as separate
    operators.
    """

    operators: np.ndarray  # (m, d, d), computational basis

    def __len__(self):
        return len(self.operators)

    def generator(self) -> Superoperator:
        V = self.operators
        d = V.shape[1]
        jump = np.einsum("xai,xbj->baji", V, V.conj()).reshape(d * d, d * d)
        VdV = np.einsum("xba,xbc->ac", V.conj(), V)
        I = np.eye(d)
        return Superoperator(jump - 0.5 * (np.kron(I, VdV) + np.kron(VdV.T, I)))


def _filtered_vectors(G: np.ndarray):
    """Factor each PSD Gram matrix as sum_q a_q a_q^dag; returns (vectors, median index)."""
    vecs, meds = [], []
    for m, Gm in enumerate(G):
        w, u = np.linalg.eigh(0.5 * (Gm + Gm.conj().T))
        for q in np.nonzero(w > GRAM_CUTOFF)[0]:
            vecs.append(np.sqrt(w[q]) * u[:, q])
            meds.append(m)
    return np.array(vecs), np.array(meds, dtype=int)


def _raw_vectors(table, g: int, flipped: bool):
    tuples = outcome_tuples(table.grid.size, g)
    amp = table.amplitudes(flipped)
    b = np.prod(amp[:, tuples], axis=2).T  # (N**g, d)
    return b, np.sort(tuples, axis=1)[:, g // 2]


def lindblad_operators(
    es: EigenSystem,
    grid: EnergyGrid,
    g: int,
    ensemble: JumpEnsemble,
    beta: float,
    raw: bool = False,
) -> LindbladSet:
    """Jump operators of the generator.

    With ``raw=True`` one operator per outcome pair (E, E') is produced, i.e.
    ``sqrt(mu f) B_{E'} C B_E`` with ``B_E`` diagonal in the eigenbasis.  The
    default groups outcomes by median and factorises each Gram matrix, which
    gives the same generator with far fewer operators.
    """
    table = single_round_amplitudes(es, grid)
    f = acceptance_matrix(grid, beta)
    V = es.vectors
    ops = []
    for flipped in FLIPS:
        if raw:
            a, med = _raw_vectors(table, g, flipped)
        else:
            a, med = _filtered_vectors(gram_family(table, g, flipped).by_median)
        rate = f[med[:, None], med[None, :]]  # (p, p')
        for C, mu in zip(ensemble.operators, ensemble.weights):
            Ct = V.conj().T @ C @ V
            # W[p, p'] = sqrt(mu f[p, p']) diag(a_{p'}) Ct diag(a_p)
            W = np.sqrt(mu * rate)[:, :, None, None] * a[None, :, :, None] * Ct[None, None] * a[:, None, None, :]
            W = W.reshape(-1, es.dim, es.dim)
            ops.append(V @ W @ V.conj().T)
    return LindbladSet(np.concatenate(ops))


def reassembly_error(es, grid, g, ensemble, beta) -> float:
    """max over jumps and orientations of |sum_{E,E'} V / sqrt(mu f) - C| for the raw operators."""
    table = single_round_amplitudes(es, grid)
    f = acceptance_matrix(grid, beta)
    err = 0.0
    for flipped in FLIPS:
        a, med = _raw_vectors(table, g, flipped)
        rate = f[med[:, None], med[None, :]]
        for C, mu in zip(ensemble.operators, ensemble.weights):
            Ct = es.to_eigenbasis(C)
            W = np.sqrt(mu * rate)[:, :, None, None] * a[None, :, :, None] * Ct[None, None] * a[:, None, None, :]
            back = (W / np.sqrt(mu * rate)[:, :, None, None]).sum(axis=(0, 1))
            err = max(err, float(np.max(np.abs(back - Ct))))
    return err


def fixed_point(L: Superoperator) -> np.ndarray:
    vals = np.linalg.eigvals(L.matrix)
    near = np.sum(np.abs(vals) < NULL_TOL)
    if near != 1:
        raise UniquenessError(f"generator has {near} eigenvalues within {NULL_TOL} of zero")
    _, _, Vh = np.linalg.svd(L.matrix)
    rho = unvec(Vh[-1].conj(), L.dim)
    rho = rho / np.trace(rho)
    return 0.5 * (rho + rho.conj().T)


def _sandwich(sigma: np.ndarray, p: float) -> np.ndarray:
    s = matrix_power_psd(sigma, p)
    return np.kron(s.T, s)


def sigma_dual(L: Superoperator, sigma: np.ndarray) -> Superoperator:
    """Adjoint of L for the inner product <M, N>_sigma = tr(sigma^{1/2} M^dag sigma^{1/2} N)."""
    phi = _sandwich(sigma, 0.5)
    phi_inv = _sandwich(sigma, -0.5)
    return Superoperator(phi_inv @ L.matrix.conj().T @ phi)


@dataclass(frozen=True)
class SpectralReport:
    fixed_point: np.ndarray
    sigma: np.ndarray
    gap: float
    symmetric_eigenvalues: np.ndarray  # descending
    eigenvalues: np.ndarray  # of L itself, by decreasing real part

    @property
    def n_qubits(self) -> int:
        return self.fixed_point.shape[0].bit_length() - 1


def symmetrized(L: Superoperator, sigma: np.ndarray) -> np.ndarray:
    """Hermitian matrix similar to (L + L*)/2 under N -> sigma^{1/4} N sigma^{1/4}."""
    gam = _sandwich(sigma, 0.25)
    gam_inv = _sandwich(sigma, -0.25)
    A = gam @ L.matrix @ gam_inv
    return 0.5 * (A + A.conj().T)


def spectral_gap(L: Superoperator, sigma: np.ndarray | None = None) -> SpectralReport:
    rho = fixed_point(L)
    w = np.linalg.eigvalsh(rho)
    if w[0] <= 0:
        raise ConditioningError("fixed point is not full rank")
    if sigma is None:
        sigma = np.linalg.inv(rho)
        sigma = 0.5 * (sigma + sigma.conj().T)
    sym = np.sort(np.linalg.eigvalsh(symmetrized(L, sigma)))[::-1]
    ev = np.linalg.eigvals(L.matrix)
    ev = ev[np.argsort(-ev.real)]
    return SpectralReport(rho, sigma, float(-sym[1]), sym, ev)


def propagator(L: Superoperator, t: float) -> Superoperator:
    if t < 0:
        raise DomainError("evolution time must be non-negative")
    return Superoperator(expm(t * L.matrix))


def evolve(L: Superoperator, t: float, rho: np.ndarray) -> np.ndarray:
    return propagator(L, t).apply(rho)


def mixing_bound(report: SpectralReport, rho: np.ndarray, t: float) -> float:
    """2^{n/2} sqrt(tr(s rho s rho)) exp(-gap t) with s = sigma^{1/2}."""
    s = matrix_power_psd(report.sigma, 0.5)
    overlap = float(np.real(np.trace(s @ rho @ s @ rho)))
    return 2 ** (report.n_qubits / 2) * math.sqrt(max(overlap, 0.0)) * math.exp(-report.gap * t)


def probe_states(d: int, n_random: int = 50, seed: int = 0) -> np.ndarray:
    """Basis projectors, the two kinds of pairwise superposition, plus Haar-ish random pure states."""
    states = []
    eye = np.eye(d, dtype=complex)
    for i in range(d):
        states.append(np.outer(eye[i], eye[i]))
        for j in range(i + 1, d):
            for ph in (1, 1j):
                v = (eye[i] + ph * eye[j]) / np.sqrt(2)
                states.append(np.outer(v, v.conj()))
    rng = np.random.Generator(np.random.Philox(seed))
    for _ in range(n_random):
        v = rng.normal(size=d) + 1j * rng.normal(size=d)
        v /= np.linalg.norm(v)
        states.append(np.outer(v, v.conj()))
    return np.array(states)


@dataclass(frozen=True)
class MixingEstimate:
    t_mix: float
    analytic_bound: float
    epsilon: float
    worst_state: np.ndarray


def mixing_time_estimate(
    L: Superoperator,
    epsilon: float,
    report: SpectralReport | None = None,
    n_random: int = 50,
    seed: int = 0,
    rel_tol: float = 1e-3,
) -> MixingEstimate:
    """Smallest t with max over probe states of ||e^{tL} rho - rho_L||_1 <= epsilon (bisection).

    This is a lower estimate of the true mixing time; the analytic bound from the
    spectral gap is reported alongside.
    """
    if not 0 < epsilon < 2:
        raise DomainError("epsilon must lie in (0, 2)")
    if report is None:
        report = spectral_gap(L)
    d = L.dim
    probes = probe_states(d, n_random, seed)
    vecs = probes.transpose(0, 2, 1).reshape(len(probes), -1)
    target = vec(report.fixed_point)

    def worst(t):
        out = vecs @ expm(t * L.matrix).T - target[None, :]
        dist = [trace_norm(unvec(o, d)) for o in out]
        k = int(np.argmax(dist))
        return dist[k], k

    lo, hi = 0.0, 1.0 / max(report.gap, 1e-12)
    while worst(hi)[0] > epsilon:
        lo, hi = hi, 2 * hi
    while hi - lo > rel_tol * hi:
        mid = 0.5 * (lo + hi)
        if worst(mid)[0] > epsilon:
            lo = mid
        else:
            hi = mid
    _, k = worst(hi)
    lam_max = float(np.linalg.eigvalsh(report.sigma)[-1])
    n = report.n_qubits
    bound = (math.log(1 / epsilon) + n * math.log(2) / 2 + 0.5 * math.log(lam_max)) / report.gap
    return MixingEstimate(hi, bound, epsilon, probes[k])
