"""One iteration of the Metropolis-style sampler as an exact quantum channel.

The channel is assembled in the energy eigenbasis from the Gram family of the
boosted phase estimate and rotated back to the computational basis at the end.
Per jump ``C`` and per orientation of the phase estimation (forward or
conjugated) the three measurement branches contribute

* accept            tau^2 * A_f
* alternate accept  tau^2 * A_f - tau^4 * A_{f^2}
* reject            I - tau^2 {D, .} + tau^4 R

where ``A_h(rho) = sum_{m,m'} h(m,m') G[m'] o (C (G[m] o rho) C^dag)``, ``o`` is the
entrywise product and ``R`` is the second-order rewind term.  Since none of
``A_f``, ``A_{f^2}``, ``D`` and ``R`` depend on tau, the full channel is exactly
``I + tau^2 L + tau^4 J`` with tau-independent ``L`` and ``J``.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import ConfigurationError, DomainError, ValidationError
from .hamiltonians import PAULI, EigenSystem, site_operator
from .qpe import AmplitudeTable, EnergyGrid, GramFamily, gram_family, single_round_amplitudes
from .superop import Superoperator

FLIPS = (False, True)


def acceptance_prob(E, E_prime, beta):
    """min(1, exp(beta (E - E')))."""
    x = beta * (np.asarray(E, dtype=float) - np.asarray(E_prime, dtype=float))
    return np.exp(np.minimum(x, 0.0))


def acceptance_matrix(grid: EnergyGrid, beta: float) -> np.ndarray:
    p = grid.points
    return acceptance_prob(p[:, None], p[None, :], beta)


def flag_rotation(f: float, tau: float) -> np.ndarray:
    """2x2 block of the acceptance rotation on the flag qubit."""
    if not 0 <= tau <= 1:
        raise DomainError("tau must lie in [0, 1]")
    s, t = math.sqrt(1 - tau**2 * f), tau * math.sqrt(f)
    return np.array([[s, t], [t, -s]])


@dataclass(frozen=True)
class JumpEnsemble:
    operators: np.ndarray
    weights: np.ndarray
    labels: tuple = ()

    def __post_init__(self):
        ops = np.asarray(self.operators, dtype=complex)
        w = np.asarray(self.weights, dtype=float)
        if ops.ndim != 3 or len(ops) != len(w):
            raise ValidationError("operators and weights do not match")
        if np.any(w <= 0) or abs(w.sum() - 1) > 1e-12:
            raise ValidationError("weights must be positive and sum to one")
        d = ops.shape[1]
        for C in ops:
            if np.max(np.abs(C.conj().T @ C - np.eye(d))) > 1e-10:
                raise ValidationError("jump operators must be unitary")
        for C, wc in zip(ops, w):
            partner = [
                k for k, C2 in enumerate(ops) if np.max(np.abs(C2 - C.conj().T)) < 1e-10 and abs(w[k] - wc) < 1e-12
            ]
            if not partner:
                raise ValidationError("ensemble is not closed under adjoints with matching weights")
        object.__setattr__(self, "operators", ops)
        object.__setattr__(self, "weights", w)

    @property
    def dim(self) -> int:
        return self.operators.shape[1]

    def __len__(self):
        return len(self.weights)

    def algebra_dimension(self, tol: float = 1e-9) -> int:
        """Dimension of the span of all products of at most 2n jumps (the empty product included)."""
        d = self.dim
        n = d.bit_length() - 1
        basis = np.zeros((0, d * d), dtype=complex)

        def extend(basis, cands):
            added = []
            for v in cands:
                v = v.reshape(-1)
                r = v - basis.T @ (basis.conj() @ v)
                nrm = np.linalg.norm(r)
                if nrm > tol * max(1.0, np.linalg.norm(v)):
                    basis = np.vstack([basis, (r / nrm)[None]])
                    added.append(v.reshape(d, d))
            return basis, added

        basis, frontier = extend(basis, [np.eye(d, dtype=complex)])
        for _ in range(2 * n):
            cands = [C @ P for P in frontier for C in self.operators]
            basis, frontier = extend(basis, cands)
            if not frontier or len(basis) == d * d:
                break
        return len(basis)

    def spans_full_algebra(self) -> bool:
        return self.algebra_dimension() == self.dim**2


def pauli_jump_ensemble(n: int) -> JumpEnsemble:
    """Uniform mixture of the single-qubit Paulis X, Y, Z on every site."""
    ops, labels = [], []
    for i in range(n):
        for p in "XYZ":
            ops.append(site_operator(PAULI[p], i, n))
            labels.append(f"{p}{i}")
    return JumpEnsemble(np.array(ops), np.full(len(ops), 1 / len(ops)), tuple(labels))


def jump_ensemble(name: str, n: int) -> JumpEnsemble:
    if name == "pauli":
        return pauli_jump_ensemble(n)
    if name in ("z", "x"):
        p = name.upper()
        ops = [site_operator(PAULI[p], i, n) for i in range(n)]
        return JumpEnsemble(np.array(ops), np.full(n, 1 / n), tuple(f"{p}{i}" for i in range(n)))
    raise ConfigurationError(f"unknown jump ensemble {name!r}")


# --- tensors shared by the fast build ------------------------------------------------


def rewind_overlaps(table: AmplitudeTable, flipped: bool = False) -> np.ndarray:
    """Single-round ``Q_{j'} Q_j^dag`` for every pair of eigenstates, shape (d, d, N, N).

    ``Q_j`` is one round of phase estimation controlled on eigenstate j
    (Hadamards, phase kicks, inverse Fourier transform); the product only
    depends on the phase difference and is circulant.
    """
    N = table.grid.size
    a = np.arange(N)
    F = np.exp(2j * np.pi * np.outer(a, a) / N) / np.sqrt(N)  # F[nu, a]
    dphi = table.phases[None, :] - table.phases[:, None]  # [j, j'] -> phi_j' - phi_j
    kick = np.exp(2j * np.pi * dphi[:, :, None] * a[None, None, :])  # (d, d, N)
    R = np.einsum("va,jka,aw->jkvw", F.conj(), kick, F)
    return R.conj() if flipped else R


def _compositions(g: int, parts: int):
    if parts == 1:
        yield (g,)
        return
    for first in range(g + 1):
        for rest in _compositions(g - first, parts - 1):
            yield (first,) + rest


def pair_median_tensor(table: AmplitudeTable, g: int, flipped: bool = False) -> np.ndarray:
    """T[i, i', j, j', F, E] = sum over g-round tuples with median(F)=F, median(E)=E of
    prod_t conj(b_{i' F_t}) R^{j j'}_{F_t E_t} b_{i E_t}.

    Evaluated from 2D cumulative sums: the weight of tuples with at least (g+1)/2
    rounds at or below each threshold, followed by a 2D finite difference.
    """
    amp = table.amplitudes(flipped)
    R = rewind_overlaps(table, flipped)
    d, N = amp.shape
    h = (g + 1) // 2
    terms = [
        (math.factorial(g) // (math.factorial(a) * math.factorial(b) * math.factorial(c) * math.factorial(e)), a, b, c, e)
        for a, b, c, e in _compositions(g, 4)
        if a + b >= h and a + c >= h
    ]
    out = np.empty((d, d, d, d, N, N), dtype=complex)
    for i in range(d):
        A = amp.conj()[:, None, None, :, None] * R[None] * amp[i][None, None, None, None, :]
        cum = A.cumsum(axis=-2).cumsum(axis=-1)
        rowL = cum[..., :, -1:]
        colL = cum[..., -1:, :]
        tot = cum[..., -1:, -1:]
        w = (cum, rowL - cum, colL - cum, tot - rowL - colL + cum)
        powers = [[np.ones_like(cum)] for _ in range(4)]
        for q in range(4):
            for _ in range(g):
                powers[q].append(powers[q][-1] * w[q])
        S = np.zeros_like(cum)
        for coef, a, b, c, e in terms:
            S += coef * powers[0][a] * powers[1][b] * powers[2][c] * powers[3][e]
        out[i] = np.diff(np.diff(S, axis=-2, prepend=0), axis=-1, prepend=0)
    return out


def rewind_tensor(table: AmplitudeTable, g: int, f: np.ndarray, flipped: bool = False) -> np.ndarray:
    """X[i, i', j, j', k, k']: contraction of the pair-median tensors of both registers with f."""
    T = pair_median_tensor(table, g, flipped)
    d, N = T.shape[0], T.shape[-1]
    k = np.arange(d)
    T3 = T[k[:, None], k[None, :], k[:, None], k[None, :]]  # (d, d, N, N)
    Y = np.einsum("FA,klAB,EB->klFE", f, T3, f)
    return np.einsum("aFE,kFE->ak", T.reshape(d**4, N, N), Y.reshape(d * d, N, N)).reshape((d,) * 6)


# --- per-branch superoperators in the eigenbasis ------------------------------------


def _schur_sandwich(G: np.ndarray, h: np.ndarray) -> np.ndarray:
    """P[m,k,j,l] = sum_{a,b} G[b]_{mk} h[a,b] G[a]_{jl}."""
    return np.einsum("bmk,ab,ajl->mkjl", G, h, G)


def _accept_superop(P: np.ndarray, Ct: np.ndarray) -> np.ndarray:
    d = Ct.shape[0]
    M = P * Ct[:, None, :, None] * Ct.conj()[None, :, None, :]
    return M.transpose(1, 0, 3, 2).reshape(d * d, d * d)


def _rate_operator(G: np.ndarray, f: np.ndarray, Ct: np.ndarray) -> np.ndarray:
    """<0| U^dag W00 U |0> restricted to the system register."""
    h = np.einsum("ab,bkk->ak", f, G)
    return np.einsum("ajl,kj,ak,kl->jl", G.conj(), Ct.conj(), h, Ct)


def _anticommutator_superop(D: np.ndarray) -> np.ndarray:
    d = D.shape[0]
    I = np.eye(d)
    return np.kron(I, D) + np.kron(D.T, I)


def _rewind_superop(X: np.ndarray, Ct: np.ndarray) -> np.ndarray:
    d = Ct.shape[0]
    # Jx[j,l,i,I] = sum_{k,K} conj(C[k,j]) C[K,l] C[k,i] conj(C[K,I]) X[i,I,j,l,k,K]
    Jx = np.einsum("kj,Kl,ki,KI,iIjlkK->jliI", Ct.conj(), Ct, Ct, Ct.conj(), X, optimize=True)
    return Jx.transpose(1, 0, 3, 2).reshape(d * d, d * d)


@dataclass
class ChannelDecomposition:
    E_tau: Superoperator
    L: Superoperator
    J_tau: Superoperator
    tau: float


@dataclass
class ChannelParts:
    """tau-independent pieces of the channel, per jump and orientation, in the computational basis.

    ``accept[c][flip]`` is A_f, ``accept_sq`` is A_{f^2}, ``rate`` the
    anticommutator map {D, .} and ``rewind`` the second-order reject term.
    """

    es: EigenSystem
    grid: EnergyGrid
    g: int
    beta: float
    ensemble: JumpEnsemble
    accept: list = field(default_factory=list)
    accept_sq: list = field(default_factory=list)
    rate: list = field(default_factory=list)
    _rewind: list | None = None

    @property
    def rewind(self) -> list:
        # the only expensive piece; the generator does not need it
        if self._rewind is None:
            self._rewind = _rewind_superops(self.es, self.grid, self.g, self.ensemble, self.beta)
        return self._rewind

    @property
    def dim(self) -> int:
        return self.es.dim

    def _average(self, fn) -> Superoperator:
        d = self.dim
        total = np.zeros((d * d, d * d), dtype=complex)
        for c, mu in enumerate(self.ensemble.weights):
            for s in range(2):
                total += 0.5 * mu * fn(c, s)
        return Superoperator(total)

    def generator(self) -> Superoperator:
        return self._average(lambda c, s: 2 * self.accept[c][s].matrix - self.rate[c][s].matrix)

    def second_order(self) -> Superoperator:
        return self._average(lambda c, s: self.rewind[c][s].matrix - self.accept_sq[c][s].matrix)

    def accept_average(self) -> Superoperator:
        return self._average(lambda c, s: self.accept[c][s].matrix)

    def rate_average(self) -> Superoperator:
        return self._average(lambda c, s: self.rate[c][s].matrix)

    def branches(self, tau: float, c: int, flipped: bool) -> dict:
        """Superoperators of the accept / alternate-accept / reject branches for one jump and orientation."""
        s = int(flipped)
        t2, t4 = tau**2, tau**4
        A, A2 = self.accept[c][s].matrix, self.accept_sq[c][s].matrix
        ident = np.eye(self.dim**2)
        return {
            "a": Superoperator(t2 * A),
            "b": Superoperator(t2 * A - t4 * A2),
            "r": Superoperator(ident - t2 * self.rate[c][s].matrix + t4 * self.rewind[c][s].matrix),
        }

    def at(self, tau: float) -> ChannelDecomposition:
        if not 0 < tau <= 1:
            raise DomainError("tau must lie in (0, 1]")
        L, J = self.generator(), self.second_order()
        E = Superoperator.identity(self.dim) + tau**2 * L + tau**4 * J
        return ChannelDecomposition(E, L, J, tau)


def _gram_pair(grams, table, g):
    if grams is None:
        return gram_family(table, g, False), gram_family(table, g, True)
    fwd, bwd = grams
    for fam in grams:
        if fam.grid != table.grid:
            raise ConfigurationError("Gram family was built on a different grid")
        if fam.g != g:
            raise ConfigurationError("Gram families disagree on g")
    if fwd.flipped or not bwd.flipped:
        raise ConfigurationError("expected (forward, conjugated) Gram families")
    return fwd, bwd


def channel_parts(
    es: EigenSystem,
    grid: EnergyGrid,
    g: int,
    ensemble: JumpEnsemble,
    beta: float,
    grams: tuple[GramFamily, GramFamily] | None = None,
) -> ChannelParts:
    if beta < 0:
        raise DomainError("beta must be non-negative")
    if ensemble.dim != es.dim:
        raise ConfigurationError("jump ensemble and Hamiltonian act on different spaces")
    table = single_round_amplitudes(es, grid)
    fams = _gram_pair(grams, table, g)
    f = acceptance_matrix(grid, beta)
    parts = ChannelParts(es, grid, g, beta, ensemble)
    V = es.vectors
    per_flip = [(_schur_sandwich(fam.by_median, f), _schur_sandwich(fam.by_median, f**2), fam.by_median) for fam in fams]
    for C in ensemble.operators:
        Ct = V.conj().T @ C @ V
        rows = ([], [], [])
        for P, P2, G in per_flip:
            rows[0].append(Superoperator(_accept_superop(P, Ct)).change_basis(V))
            rows[1].append(Superoperator(_accept_superop(P2, Ct)).change_basis(V))
            rows[2].append(Superoperator(_anticommutator_superop(_rate_operator(G, f, Ct))).change_basis(V))
        parts.accept.append(rows[0])
        parts.accept_sq.append(rows[1])
        parts.rate.append(rows[2])
    return parts


def _rewind_superops(es, grid, g, ensemble, beta) -> list:
    table = single_round_amplitudes(es, grid)
    f = acceptance_matrix(grid, beta)
    X = [rewind_tensor(table, g, f, flipped) for flipped in FLIPS]
    V = es.vectors
    out = []
    for C in ensemble.operators:
        Ct = V.conj().T @ C @ V
        out.append([Superoperator(_rewind_superop(Xs, Ct)).change_basis(V) for Xs in X])
    return out


def build_fast_channel(
    es: EigenSystem,
    grid: EnergyGrid,
    grams: tuple[GramFamily, GramFamily] | None,
    ensemble: JumpEnsemble,
    beta: float,
    tau: float,
    g: int | None = None,
) -> ChannelDecomposition:
    if g is None:
        if grams is None:
            raise ConfigurationError("pass either the Gram families or g")
        g = grams[0].g
    return channel_parts(es, grid, g, ensemble, beta, grams).at(tau)


def extract_J(E: Superoperator, L: Superoperator, tau: float) -> Superoperator:
    """(E - I - tau^2 L) / tau^4."""
    if tau == 0:
        raise DomainError("cannot extract the fourth-order term at tau = 0")
    ident = Superoperator.identity(E.dim)
    return Superoperator((E.matrix - ident.matrix - tau**2 * L.matrix) / tau**4)


# --- class-projected operators -------------------------------------------------------

CLASSES = ("floor", "ceil", "rest", "all")


def class_mask(table: AmplitudeTable, which: str) -> np.ndarray:
    from .qpe import neighbour_mask

    if which == "all":
        return np.ones(table.beta.shape, dtype=bool)
    return neighbour_mask(table, which)


def _masked_grams(table, g, which_left, which_right, flipped):
    G = gram_family(table, g, flipped).by_median
    ml = class_mask(table, which_left).T.astype(float)  # (N, d)
    mr = class_mask(table, which_right).T.astype(float)
    return G * ml[:, :, None] * mr[:, None, :]


def projected_accept(es, grid, g, ensemble, beta, A, B, X, Y) -> Superoperator:
    """Accept map with the outcome medians restricted to classes.

    The left copy of the forward unitary keeps medians in A (second estimate)
    and B (first estimate); the right copy uses X and Y likewise.  Averaged over
    jumps and both orientations.
    """
    table = single_round_amplitudes(es, grid)
    f = acceptance_matrix(grid, beta)
    d = es.dim
    total = np.zeros((d * d, d * d), dtype=complex)
    for flipped in FLIPS:
        outer = _masked_grams(table, g, A, X, flipped)
        inner = _masked_grams(table, g, B, Y, flipped)
        P = np.einsum("bmk,ab,ajl->mkjl", outer, f, inner)
        for C, mu in zip(ensemble.operators, ensemble.weights):
            total += 0.5 * mu * _accept_superop(P, es.to_eigenbasis(C))
    return Superoperator(total).change_basis(es.vectors)


def projected_rate(es, grid, g, ensemble, beta, A, B, X, Y) -> np.ndarray:
    """<0| (U^{BA})^dag W10^dag W10 U^{YX} |0> on the system, computational basis.

    A and X restrict the first estimate (left and right), B and Y the second.
    """
    table = single_round_amplitudes(es, grid)
    f = acceptance_matrix(grid, beta)
    d = es.dim
    D = np.zeros((d, d), dtype=complex)
    for flipped in FLIPS:
        first = _masked_grams(table, g, A, X, flipped)
        second = _masked_grams(table, g, B, Y, flipped)
        h = np.einsum("ab,bll->al", f, second)
        for C, mu in zip(ensemble.operators, ensemble.weights):
            Ct = es.to_eigenbasis(C)
            D += 0.5 * mu * np.einsum("amk,lm,al,lk->mk", first.conj(), Ct.conj(), h, Ct)
    return es.from_eigenbasis(D)
