"""Exact output amplitudes of (boosted) phase estimation on an energy grid.

A single round with ``r`` ancilla qubits maps an eigenstate with energy ``E``
to a superposition over the ``2**r`` grid points ``m * kappa / 2**r``.
Boosting repeats the round ``g`` times (``g`` odd) and reads off the median.

Everything the channel needs reduces to the *Gram family*: for each possible
median value ``m`` the ``d x d`` matrix

    G[m]_{jk} = sum_{E : median(E) = m} beta_{jE} conj(beta_{kE})

which is computed either by brute-force enumeration of all ``2**(r g)``
outcome tuples or, by default, from cumulative sums and a binomial count over
how many rounds land at or below a threshold.
"""
from __future__ import annotations

import itertools
import math
from dataclasses import dataclass

import numpy as np

from .errors import ConfigurationError, DomainError, SizeError
from .hamiltonians import EigenSystem

# relative tolerance for treating an energy as lying exactly on a grid point
SNAP_TOL = 1e-9
ENUMERATION_LIMIT = 2**20


@dataclass(frozen=True)
class EnergyGrid:
    r: int
    kappa: float

    def __post_init__(self):
        if self.r < 1:
            raise ConfigurationError("need at least one ancilla qubit (r >= 1)")
        k = math.log2(self.kappa) if self.kappa > 0 else float("nan")
        if not (k == int(k)):
            raise ConfigurationError(f"kappa={self.kappa} is not a power of two")

    @property
    def size(self) -> int:
        return 2**self.r

    @property
    def spacing(self) -> float:
        return self.kappa / self.size

    @property
    def points(self) -> np.ndarray:
        return np.arange(self.size) * self.spacing

    def energy_from_bits(self, bits) -> float:
        """Energy encoded by an r-bit string, most significant bit first."""
        bits = list(bits)
        if len(bits) != self.r or any(b not in (0, 1) for b in bits):
            raise DomainError(f"expected {self.r} bits, got {bits}")
        return self.kappa * sum(b * 2.0 ** -(i + 1) for i, b in enumerate(bits))

    def floor_index(self, energies):
        """Grid index of the largest grid point <= E, and the residual E/kappa - index/2**r.

        Energies within a relative ``SNAP_TOL`` of a grid point are snapped onto it,
        so the residual is exactly zero there.
        """
        x = np.asarray(energies, dtype=float) / self.spacing
        nearest = np.rint(x)
        on_grid = np.abs(x - nearest) <= SNAP_TOL * np.maximum(1.0, np.abs(x))
        idx = np.where(on_grid, nearest, np.floor(x)).astype(int)
        eps = np.where(on_grid, 0.0, (x - idx) / self.size)
        return idx, eps

    def index_of(self, value: float) -> int:
        idx, eps = self.floor_index([value])
        if eps[0] != 0.0 or not 0 <= idx[0] < self.size:
            raise DomainError(f"{value} is not a point of the r={self.r} grid")
        return int(idx[0])

    def minimal_r(self, beta: float) -> int:
        """Smallest r with 2*beta*kappa*2**-r <= 1."""
        if beta <= 0:
            return 1
        return max(1, math.ceil(math.log2(2 * beta * self.kappa) - 1e-12))


def energy_grid(r: int, kappa: float) -> EnergyGrid:
    return EnergyGrid(int(r), float(kappa))


@dataclass(frozen=True)
class AmplitudeTable:
    """Single-round amplitudes.

    ``beta[j, m]`` is the amplitude of grid index ``m`` for eigenstate ``j``;
    ``gamma[j, :]`` holds the same numbers ordered by offset
    ``l = -2**(r-1)+1 .. 2**(r-1)`` from the floor index.
    """

    grid: EnergyGrid
    beta: np.ndarray
    gamma: np.ndarray
    offsets: np.ndarray
    floor_index: np.ndarray
    epsilon: np.ndarray
    phases: np.ndarray  # E_j / kappa after snapping

    @property
    def dim(self) -> int:
        return self.beta.shape[0]

    def amplitudes(self, flipped: bool = False) -> np.ndarray:
        return self.beta.conj() if flipped else self.beta


def _dirichlet(theta: np.ndarray, N: int) -> np.ndarray:
    # (1/N) sum_k exp(2 pi i k theta / N), theta never an integer multiple of N here
    return np.exp(1j * np.pi * theta * (1 - 1 / N)) * np.sin(np.pi * theta) / (N * np.sin(np.pi * theta / N))


def amplitudes_for_energies(energies, grid: EnergyGrid):
    """Single-round amplitudes over grid indices for arbitrary energies in [0, kappa)."""
    N = grid.size
    idx, eps = grid.floor_index(energies)
    m = np.arange(N)
    beta = np.zeros((len(idx), N), dtype=complex)
    exact = eps == 0.0
    beta[np.nonzero(exact)[0], idx[exact] % N] = 1.0
    rest = ~exact
    beta[rest] = _dirichlet((idx[rest, None] - m[None, :]) + N * eps[rest, None], N)
    return beta, idx, eps


def single_round_amplitudes(es: EigenSystem, grid: EnergyGrid) -> AmplitudeTable:
    if es.kappa != grid.kappa:
        raise ConfigurationError(f"grid kappa {grid.kappa} differs from eigensystem kappa {es.kappa}")
    N = grid.size
    beta, idx, eps = amplitudes_for_energies(es.energies, grid)
    offsets = np.arange(-N // 2 + 1, N // 2 + 1)
    gamma = beta[np.arange(es.dim)[:, None], (idx[:, None] + offsets[None, :]) % N]
    phases = idx / N + eps
    return AmplitudeTable(grid, beta, gamma, offsets, idx, eps, phases)


def neighbour_probability(theta, r: int) -> np.ndarray:
    """|gamma_0|^2 + |gamma_1|^2 for an energy a fraction theta in [0, 1) of a grid step above a grid point."""
    grid = EnergyGrid(r, 2.0**r)  # unit spacing
    beta, idx, _ = amplitudes_for_energies(np.asarray(theta, dtype=float) + 1.0, grid)
    rows = np.arange(len(idx))
    return np.abs(beta[rows, idx % grid.size]) ** 2 + np.abs(beta[rows, (idx + 1) % grid.size]) ** 2


def median(values) -> float:
    v = np.sort(np.asarray(values))
    if len(v) % 2 == 0:
        raise ConfigurationError(f"median of {len(v)} rounds is ambiguous: the number of rounds g must be odd")
    return v[len(v) // 2]


def boosted_amplitude(table: AmplitudeTable, j: int, E, flipped: bool = False) -> complex:
    """Amplitude of the outcome tuple ``E`` (grid energies, one per round)."""
    E = list(E)
    if len(E) % 2 == 0:
        raise ConfigurationError("the number of rounds g must be odd")
    amp = table.amplitudes(flipped)[j]
    out = 1.0 + 0j
    for e in E:
        out *= amp[table.grid.index_of(e)]
    return out


@dataclass(frozen=True)
class GramFamily:
    """``by_median[m]`` is the d x d Gram matrix of outcomes whose median has grid index m."""

    g: int
    grid: EnergyGrid
    flipped: bool
    by_median: np.ndarray

    def total(self) -> np.ndarray:
        return self.by_median.sum(axis=0)

    def masked(self, mask: np.ndarray) -> "GramFamily":
        """Zero G[m]_{jk} unless mask[j, m] and mask[k, m]."""
        m = mask.T.astype(float)  # (N, d)
        return GramFamily(self.g, self.grid, self.flipped, self.by_median * m[:, :, None] * m[:, None, :])


def _check_g(g: int):
    if g < 1 or g % 2 == 0:
        raise ConfigurationError(f"g={g}: the number of boosting rounds must be odd so the median is unique")


def outcome_tuples(N: int, g: int) -> np.ndarray:
    if N**g > ENUMERATION_LIMIT:
        raise SizeError(f"{N}**{g} outcome tuples exceed the enumeration limit")
    return np.array(list(itertools.product(range(N), repeat=g)), dtype=int).reshape(-1, g)


def _gram_enumerate(amp: np.ndarray, g: int) -> np.ndarray:
    d, N = amp.shape
    tuples = outcome_tuples(N, g)
    med = np.sort(tuples, axis=1)[:, g // 2]
    prod = np.prod(amp[:, tuples], axis=2)  # (d, N**g)
    out = np.zeros((N, d, d), dtype=complex)
    for m in range(N):
        sel = prod[:, med == m]
        out[m] = sel @ sel.conj().T
    return out


def median_cdf_weights(low: np.ndarray, total: np.ndarray, g: int) -> np.ndarray:
    """sum over g rounds of products, restricted to at least (g+1)/2 rounds in the 'low' set.

    ``low`` holds the per-round weight of the low set, ``total`` the weight of all outcomes.
    """
    h = (g + 1) // 2
    high = total - low
    out = np.zeros(np.broadcast(low, total).shape, dtype=complex)
    for c in range(h, g + 1):
        out = out + math.comb(g, c) * low**c * high ** (g - c)
    return out


def _gram_dp(amp: np.ndarray, g: int) -> np.ndarray:
    pair = amp[:, None, :] * amp.conj()[None, :, :]  # (d, d, N)
    cum = np.cumsum(pair, axis=2)
    total = cum[:, :, -1:]
    cdf = median_cdf_weights(cum, total, g)
    dens = np.diff(cdf, axis=2, prepend=0)
    return np.moveaxis(dens, 2, 0)


def gram_family(table: AmplitudeTable, g: int, flipped: bool = False, method: str = "dp") -> GramFamily:
    _check_g(g)
    amp = table.amplitudes(flipped)
    if method == "dp":
        fam = _gram_dp(amp, g)
    elif method == "enumerate":
        fam = _gram_enumerate(amp, g)
    else:
        raise ConfigurationError(f"unknown Gram method {method!r}")
    return GramFamily(g, table.grid, flipped, fam)


def neighbour_mask(table: AmplitudeTable, which: str) -> np.ndarray:
    """Boolean (d, N) mask selecting, per eigenstate, the median values of a class.

    ``which`` is ``"floor"`` (the grid point just below E_j), ``"ceil"`` (the next one,
    absent when it would fall off the top of the grid) or ``"rest"``.
    """
    d, N = table.beta.shape
    cols = np.arange(N)[None, :]
    b = table.floor_index[:, None]
    floor = cols == b
    ceil = cols == b + 1
    if which == "floor":
        return floor
    if which == "ceil":
        return ceil
    if which == "rest":
        return ~(floor | ceil)
    raise ConfigurationError(f"unknown class {which!r}")


def tail_mass(table: AmplitudeTable, g: int) -> np.ndarray:
    """Per-eigenstate probability that the median misses both neighbouring grid points."""
    fam = gram_family(table, g)
    diag = np.real(np.einsum("mjj->jm", fam.by_median))
    return (diag * neighbour_mask(table, "rest")).sum(axis=1)


def fit_tail_rate(gs, tails) -> tuple[float, float]:
    """Least-squares fit of tail ~ a * rate**g in log space; returns (a, rate)."""
    gs = np.asarray(gs, dtype=float)
    y = np.log(np.asarray(tails, dtype=float))
    slope, icpt = np.polyfit(gs, y, 1)
    return float(np.exp(icpt)), float(np.exp(slope))
