"""Explicit four-register simulation of one sampler iteration.

Registers: system (eigenbasis coordinates), two phase-estimation registers of
``g`` rounds of ``r`` qubits each, and a one-qubit flag.  A joint state is an
array of shape ``(d, N**g, N**g, 2)``.  Only feasible for small ``r * g``; used
as the reference the fast channel is checked against and by the trajectory
simulator.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.linalg import hadamard

from .channel import JumpEnsemble, acceptance_matrix
from .errors import SizeError
from .hamiltonians import EigenSystem
from .qpe import EnergyGrid, outcome_tuples, single_round_amplitudes
from .superop import Superoperator

MAX_JOINT = 2**22


def round_unitaries(table, flipped: bool = False) -> np.ndarray:
    """Q[j]: one full round of phase estimation on r qubits, controlled on eigenstate j."""
    N = table.grid.size
    a = np.arange(N)
    F = np.exp(2j * np.pi * np.outer(a, a) / N) / np.sqrt(N)
    H = hadamard(N) / np.sqrt(N)
    sign = -1 if flipped else 1
    kicks = np.exp(sign * 2j * np.pi * table.phases[:, None] * a[None, :])
    outer = F if flipped else F.conj().T
    return np.einsum("va,ja,ab->jvb", outer, kicks, H)


@dataclass
class RegisterModel:
    es: EigenSystem
    grid: EnergyGrid
    g: int
    beta: float
    ensemble: JumpEnsemble

    def __post_init__(self):
        N, d = self.grid.size, self.es.dim
        if d * N ** (2 * self.g) * 2 > MAX_JOINT:
            raise SizeError(f"joint register dimension {d * N ** (2 * self.g) * 2} is too large")
        self.table = single_round_amplitudes(self.es, self.grid)
        self.Q = {fl: round_unitaries(self.table, fl) for fl in (False, True)}
        tuples = outcome_tuples(N, self.g)
        self.medians = np.sort(tuples, axis=1)[:, self.g // 2]
        f = acceptance_matrix(self.grid, self.beta)
        self.f_joint = f[self.medians[:, None], self.medians[None, :]]
        self.jumps_eig = np.array([self.es.to_eigenbasis(C) for C in self.ensemble.operators])

    @property
    def shape(self):
        M = self.grid.size**self.g
        return (self.es.dim, M, M, 2)

    def initial(self, psi_eig: np.ndarray) -> np.ndarray:
        x = np.zeros(self.shape, dtype=complex)
        x[:, 0, 0, 0] = psi_eig
        return x

    def _qpe(self, x: np.ndarray, reg: int, flipped: bool, dagger: bool) -> np.ndarray:
        N, g, d = self.grid.size, self.g, self.es.dim
        Q = self.Q[flipped]
        if dagger:
            Q = Q.conj().transpose(0, 2, 1)
        y = x.reshape((d,) + (N,) * (2 * g) + (2,))
        first = 1 if reg == 2 else 1 + g
        for ax in range(first, first + g):
            y = np.moveaxis(y, ax, 1)
            y = np.einsum("jab,jb...->ja...", Q, y)
            y = np.moveaxis(y, 1, ax)
        return y.reshape(self.shape)

    def _jump(self, x: np.ndarray, c: int, dagger: bool) -> np.ndarray:
        C = self.jumps_eig[c]
        if dagger:
            C = C.conj().T
        return np.tensordot(C, x, axes=(1, 0))

    def forward(self, x, c, flipped):
        x = self._qpe(x, 2, flipped, False)
        x = self._jump(x, c, False)
        return self._qpe(x, 3, flipped, False)

    def backward(self, x, c, flipped):
        x = self._qpe(x, 3, flipped, True)
        x = self._jump(x, c, True)
        return self._qpe(x, 2, flipped, True)

    def rotate_flag(self, x: np.ndarray, tau: float) -> np.ndarray:
        f = self.f_joint[None]
        s = np.sqrt(1 - tau**2 * f)
        t = tau * np.sqrt(f)
        a0, a1 = x[..., 0], x[..., 1]
        return np.stack([s * a0 + t * a1, t * a0 - s * a1], axis=-1)

    def branch_vectors(self, psi_eig: np.ndarray, c: int, flipped: bool, tau: float) -> dict:
        """Unnormalised joint states after each measurement branch, before the final trace-out."""
        x = self.rotate_flag(self.forward(self.initial(psi_eig), c, flipped), tau)
        acc = np.zeros_like(x)
        acc[..., 1] = x[..., 1]
        x[..., 1] = 0
        y = self.rotate_flag(x, tau)
        alt = np.zeros_like(y)
        alt[..., 1] = y[..., 1]
        y[..., 1] = 0
        rej = self.backward(y, c, flipped)
        return {"a": acc, "b": alt, "r": rej}


@dataclass
class ReferenceChannel:
    E_tau: Superoperator
    branches: dict  # (c, flipped) -> {case: Superoperator}
    kraus_completeness: float


def build_reference_channel(es, grid, g, ensemble, beta, tau) -> ReferenceChannel:
    """Channel obtained by simulating every register explicitly and tracing out the ancillas."""
    model = RegisterModel(es, grid, g, beta, ensemble)
    d = es.dim
    V = es.vectors
    total = np.zeros((d * d, d * d), dtype=complex)
    completeness = np.zeros((d, d), dtype=complex)
    branches = {}
    for c, mu in enumerate(ensemble.weights):
        for flipped in (False, True):
            cols = {k: [] for k in "abr"}
            for j in range(d):
                e = np.zeros(d, dtype=complex)
                e[j] = 1
                for k, v in model.branch_vectors(e, c, flipped, tau).items():
                    cols[k].append(v.reshape(d, -1))
            per = {}
            for k, col in cols.items():
                K = np.stack(col, axis=1)  # (out, in, env)
                S = np.einsum("aix,bjx->baji", K, K.conj()).reshape(d * d, d * d)
                completeness += 0.5 * mu * np.einsum("aix,ajx->ij", K.conj(), K)
                per[k] = Superoperator(S).change_basis(V)
                total += 0.5 * mu * S
            branches[(c, flipped)] = per
    err = float(np.max(np.abs(completeness - np.eye(d))))
    return ReferenceChannel(Superoperator(total).change_basis(V), branches, err)
