"""Test Hamiltonians, eigensystems and (truncated) Gibbs states.

All Hamiltonians are shifted so that their smallest eigenvalue is zero; the
energy grid used by phase estimation assumes a non-negative spectrum.
"""
from __future__ import annotations

import itertools
from dataclasses import dataclass
from functools import reduce

import numpy as np

from .errors import DomainError, PrecisionError, SizeError, ValidationError

MAX_QUBITS = 6
HERMITIAN_TOL = 1e-12
# eigenvalues this close below zero are treated as rounding noise
NEGATIVE_TOL = 1e-9

PAULI = {
    "I": np.eye(2, dtype=complex),
    "X": np.array([[0, 1], [1, 0]], dtype=complex),
    "Y": np.array([[0, -1j], [1j, 0]], dtype=complex),
    "Z": np.array([[1, 0], [0, -1]], dtype=complex),
}


def _frozen(a: np.ndarray) -> np.ndarray:
    a = np.array(a, copy=True)
    a.flags.writeable = False
    return a


def pauli_string(label: str) -> np.ndarray:
    """Dense matrix of a Pauli string such as ``"XZ"`` (qubit 0 leftmost)."""
    return reduce(np.kron, [PAULI[c] for c in label])


def site_operator(op: np.ndarray, site: int, n: int) -> np.ndarray:
    ops = [PAULI["I"]] * n
    ops[site] = op
    return reduce(np.kron, ops)


@dataclass(frozen=True)
class HermitianOperator:
    matrix: np.ndarray

    def __post_init__(self):
        m = np.asarray(self.matrix, dtype=complex)
        if m.ndim != 2 or m.shape[0] != m.shape[1]:
            raise ValidationError(f"expected a square matrix, got shape {m.shape}")
        d = m.shape[0]
        if d < 2 or d & (d - 1):
            raise ValidationError(f"dimension {d} is not a power of two")
        if np.max(np.abs(m - m.conj().T)) > HERMITIAN_TOL:
            raise ValidationError("operator is not Hermitian")
        object.__setattr__(self, "matrix", _frozen(m))

    @property
    def dim(self) -> int:
        return self.matrix.shape[0]

    @property
    def n_qubits(self) -> int:
        return self.dim.bit_length() - 1


@dataclass(frozen=True)
class EigenSystem:
    """Ascending eigenvalues, eigenvectors (columns) and the rescaling constant.

    ``kappa`` is the smallest power of two (at least 1) strictly above the
    largest eigenvalue, so every eigenvalue divided by ``kappa`` lies in [0, 1).
    """

    energies: np.ndarray
    vectors: np.ndarray
    kappa: float

    @property
    def dim(self) -> int:
        return len(self.energies)

    @property
    def n_qubits(self) -> int:
        return self.dim.bit_length() - 1

    def to_eigenbasis(self, op: np.ndarray) -> np.ndarray:
        return self.vectors.conj().T @ op @ self.vectors

    def from_eigenbasis(self, op: np.ndarray) -> np.ndarray:
        return self.vectors @ op @ self.vectors.conj().T


@dataclass(frozen=True)
class GibbsState:
    matrix: np.ndarray
    probabilities: np.ndarray
    partition: float
    beta: float


def _shift_to_zero(h: np.ndarray) -> np.ndarray:
    h = 0.5 * (h + h.conj().T)
    emin = np.linalg.eigvalsh(h)[0]
    return h - emin * np.eye(h.shape[0])


def build_tfim(n: int, J: float = 1.0, h: float = 0.5) -> HermitianOperator:
    """Open-chain transverse-field Ising model ``J sum Z_i Z_{i+1} + h sum X_i``."""
    if not 1 <= n <= MAX_QUBITS:
        raise SizeError(f"n={n} outside supported range 1..{MAX_QUBITS}")
    d = 2**n
    H = np.zeros((d, d), dtype=complex)
    for i in range(n - 1):
        H += J * site_operator(PAULI["Z"], i, n) @ site_operator(PAULI["Z"], i + 1, n)
    for i in range(n):
        H += h * site_operator(PAULI["X"], i, n)
    return HermitianOperator(_shift_to_zero(H))


def build_random_local(n: int, k: int, seed: int) -> HermitianOperator:
    """Sum of every Pauli string of weight 1..k with coefficients uniform in [-1, 1]."""
    if not 1 <= n <= MAX_QUBITS:
        raise SizeError(f"n={n} outside supported range 1..{MAX_QUBITS}")
    if not 1 <= k <= n:
        raise DomainError(f"locality k={k} must satisfy 1 <= k <= n")
    rng = np.random.Generator(np.random.Philox(seed))
    d = 2**n
    H = np.zeros((d, d), dtype=complex)
    for label in itertools.product("IXYZ", repeat=n):
        weight = sum(c != "I" for c in label)
        if 1 <= weight <= k:
            H += rng.uniform(-1.0, 1.0) * pauli_string("".join(label))
    return HermitianOperator(_shift_to_zero(H))


def smallest_power_of_two_above(x: float) -> float:
    kappa = 1.0
    while kappa <= x:
        kappa *= 2.0
    return kappa


def eigensystem(H: HermitianOperator | np.ndarray) -> EigenSystem:
    if not isinstance(H, HermitianOperator):
        H = HermitianOperator(np.asarray(H))
    vals, vecs = np.linalg.eigh(H.matrix)
    order = np.argsort(vals, kind="stable")
    vals, vecs = vals[order], vecs[:, order]
    if vals[0] < -NEGATIVE_TOL:
        raise ValidationError(f"Hamiltonian has negative eigenvalue {vals[0]:.3g}; shift it first")
    vals = np.where(vals < 0, 0.0, vals)
    return EigenSystem(_frozen(vals), _frozen(vecs), smallest_power_of_two_above(vals[-1]))


def gibbs(es: EigenSystem, beta: float) -> GibbsState:
    if beta < 0:
        raise DomainError("beta must be non-negative")
    weights = np.exp(-beta * es.energies)
    Z = float(weights.sum())
    p = weights / Z
    rho = (es.vectors * p) @ es.vectors.conj().T
    return GibbsState(_frozen(rho), _frozen(p), Z, beta)


def truncated_gibbs(es: EigenSystem, beta: float, grid) -> GibbsState:
    """Gibbs weights evaluated at grid-floored energies, normalised by the exact partition function.

    The result has trace slightly below one. Requires ``2 * beta * spacing <= 1``.
    """
    if beta < 0:
        raise DomainError("beta must be non-negative")
    if 2 * beta * grid.spacing > 1:
        raise PrecisionError(
            f"2*beta*w = {2 * beta * grid.spacing:.3g} > 1; increase r to at least {grid.minimal_r(beta)}"
        )
    idx, _ = grid.floor_index(es.energies)
    floored = idx * grid.spacing
    Z = float(np.exp(-beta * es.energies).sum())
    p0 = np.exp(-beta * floored) / Z
    rho = (es.vectors * p0) @ es.vectors.conj().T
    return GibbsState(_frozen(rho), _frozen(p0), Z, beta)
