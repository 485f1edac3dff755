"""Monte-Carlo unravelling of the sampler.

Two engines produce trajectories of pure states whose average is the exact channel:

``RegisterSampler``
    simulates every register explicitly, performs the flag measurements of the
    algorithm and finally measures the ancilla registers in the computational
    basis.  Faithful but limited to small ``r * g``.

``KrausSampler``
    samples, per jump and orientation, from a Kraus decomposition of each
    measurement branch (accept / alternate accept / reject) obtained from the
    branch's Choi matrix.  This is the same channel measured in a different
    ancilla basis, so averages agree; it scales to any grid the fast channel
    handles and is vectorised over trajectories.
"""
from __future__ import annotations

import csv
import io
from dataclasses import dataclass, field

import numpy as np

from .channel import ChannelParts
from .errors import DomainError
from .registers import RegisterModel
from .norms import trace_norm

CASES = ("a", "b", "r")


def make_rng(seed: int) -> np.random.Generator:
    return np.random.Generator(np.random.Philox(seed))


@dataclass(frozen=True)
class Step:
    case: str
    jump: int
    flipped: bool
    outcome1: int
    outcome2: int | None


class RegisterSampler:
    def __init__(self, es, grid, g, ensemble, beta, tau):
        if not 0 < tau <= 1:
            raise DomainError("tau must lie in (0, 1]")
        self.model = RegisterModel(es, grid, g, beta, ensemble)
        self.es = es
        self.tau = tau
        self.weights = ensemble.weights

    @property
    def dim(self):
        return self.es.dim

    def run_iteration(self, psi: np.ndarray, rng: np.random.Generator):
        m, V = self.model, self.es.vectors
        c = int(rng.choice(len(self.weights), p=self.weights))
        flipped = bool(rng.integers(2))
        x = m.rotate_flag(m.forward(m.initial(V.conj().T @ psi), c, flipped), self.tau)
        p1 = float(np.sum(np.abs(x[..., 1]) ** 2))
        outcome2 = None
        if rng.random() < p1:
            case, outcome1 = "a", 1
            x[..., 0] = 0
        else:
            outcome1 = 0
            x[..., 1] = 0
            y = m.rotate_flag(x, self.tau)
            p2 = float(np.sum(np.abs(y[..., 1]) ** 2)) / (1 - p1)
            if rng.random() < p2:
                case, outcome2 = "b", 1
                y[..., 0] = 0
                x = y
            else:
                case, outcome2 = "r", 0
                y[..., 1] = 0
                x = m.backward(y, c, flipped)
        # measure every ancilla register in the computational basis
        flat = x.reshape(self.dim, -1)
        probs = np.sum(np.abs(flat) ** 2, axis=0)
        k = int(rng.choice(len(probs), p=probs / probs.sum()))
        out = flat[:, k] / np.linalg.norm(flat[:, k])
        return V @ out, Step(case, c, flipped, outcome1, outcome2)

    def branch_average(self, rho: np.ndarray) -> np.ndarray:
        """Average output over every random choice and every measurement outcome of one iteration."""
        w, vecs = np.linalg.eigh(0.5 * (rho + rho.conj().T))
        V, d = self.es.vectors, self.dim
        out = np.zeros((d, d), dtype=complex)
        for p, psi in zip(w, vecs.T):
            if p <= 1e-15:
                continue
            for c, mu in enumerate(self.weights):
                for flipped in (False, True):
                    branches = self.model.branch_vectors(V.conj().T @ psi, c, flipped, self.tau)
                    for x in branches.values():
                        flat = V @ x.reshape(d, -1)
                        out += 0.5 * mu * p * flat @ flat.conj().T
        return out


class KrausSampler:
    def __init__(self, parts: ChannelParts, tau: float, tol: float = 1e-14):
        if not 0 < tau <= 1:
            raise DomainError("tau must lie in (0, 1]")
        self.tau = tau
        self.weights = parts.ensemble.weights
        self.d = parts.dim
        self.kraus = {}
        for c in range(len(self.weights)):
            for flipped in (False, True):
                ops, labels = [], []
                for case, S in parts.branches(tau, c, flipped).items():
                    K = S.kraus(tol)
                    ops.append(K)
                    labels += [case] * len(K)
                self.kraus[(c, flipped)] = (np.concatenate(ops), np.array(labels))

    @property
    def dim(self):
        return self.d

    def _outcome2(self, case):
        return {"a": None, "b": 1, "r": 0}[case]

    def run_iteration(self, psi, rng):
        c = int(rng.choice(len(self.weights), p=self.weights))
        flipped = bool(rng.integers(2))
        K, labels = self.kraus[(c, flipped)]
        amps = K @ psi
        probs = np.sum(np.abs(amps) ** 2, axis=1)
        k = int(rng.choice(len(probs), p=probs / probs.sum()))
        case = str(labels[k])
        step = Step(case, c, flipped, int(case == "a"), self._outcome2(case))
        return amps[k] / np.linalg.norm(amps[k]), step

    def run_batch(self, psis: np.ndarray, rng: np.random.Generator):
        """One iteration for many trajectories at once; returns new states and case labels."""
        T = len(psis)
        cs = rng.choice(len(self.weights), size=T, p=self.weights)
        flips = rng.integers(2, size=T).astype(bool)
        u = rng.random(T)
        out = np.empty_like(psis)
        cases = np.empty(T, dtype="<U1")
        for (c, flipped), (K, labels) in self.kraus.items():
            sel = np.nonzero((cs == c) & (flips == flipped))[0]
            if len(sel) == 0:
                continue
            amps = np.tensordot(psis[sel], K, axes=([1], [2]))  # (t, k, a)
            probs = np.sum(np.abs(amps) ** 2, axis=2)
            cum = np.cumsum(probs, axis=1)
            k = np.sum(cum < (u[sel] * cum[:, -1])[:, None], axis=1)
            k = np.minimum(k, len(labels) - 1)
            chosen = amps[np.arange(len(sel)), k]
            out[sel] = chosen / np.linalg.norm(chosen, axis=1, keepdims=True)
            cases[sel] = labels[k]
        return out, cases


@dataclass
class TrajectoryRecord:
    seed: int
    steps: list = field(default_factory=list)
    final_state: np.ndarray | None = None

    def case_counts(self) -> dict:
        counts = {k: 0 for k in CASES}
        for s in self.steps:
            counts[s.case] += 1
        return counts

    def to_csv(self, version: str = "") -> str:
        buf = io.StringIO()
        if version:
            buf.write(f"# qmetro {version}\n")
        w = csv.writer(buf)
        w.writerow(["iteration", "case", "jump", "flipped", "outcome1", "outcome2"])
        for i, s in enumerate(self.steps):
            w.writerow([i, s.case, s.jump, int(s.flipped), s.outcome1, "" if s.outcome2 is None else s.outcome2])
        return buf.getvalue()


def run_chain(sampler, init_state: np.ndarray, K: int, seed: int) -> TrajectoryRecord:
    if K < 0:
        raise DomainError("number of iterations must be non-negative")
    rng = make_rng(seed)
    psi = np.asarray(init_state, dtype=complex)
    psi = psi / np.linalg.norm(psi)
    rec = TrajectoryRecord(seed)
    for _ in range(K):
        psi, step = sampler.run_iteration(psi, rng)
        rec.steps.append(step)
    rec.final_state = psi
    return rec


@dataclass
class EnsembleResult:
    states: np.ndarray  # (n_traj, d)
    case_counts: dict
    seed: int


def run_ensemble(sampler, init_state: np.ndarray, K: int, n_traj: int, seed: int) -> EnsembleResult:
    """Final states of many independent trajectories started from the same pure state."""
    rng = make_rng(seed)
    psi = np.asarray(init_state, dtype=complex)
    psi = psi / np.linalg.norm(psi)
    counts = {k: 0 for k in CASES}
    if isinstance(sampler, KrausSampler):
        psis = np.tile(psi, (n_traj, 1))
        for _ in range(K):
            psis, cases = sampler.run_batch(psis, rng)
            for k in CASES:
                counts[k] += int(np.sum(cases == k))
        return EnsembleResult(psis, counts, seed)
    states = []
    for _ in range(n_traj):
        p = psi
        for _ in range(K):
            p, step = sampler.run_iteration(p, rng)
            counts[step.case] += 1
        states.append(p)
    return EnsembleResult(np.array(states), counts, seed)


def empirical_state(states) -> np.ndarray:
    """Average of |psi><psi| over final states (array or list of records)."""
    if len(states) == 0:
        raise DomainError("no trajectories to average")
    if isinstance(states[0], TrajectoryRecord):
        states = [r.final_state for r in states]
    S = np.asarray(states)
    return np.einsum("ti,tj->ij", S, S.conj()) / len(S)


def bootstrap_sigma(states: np.ndarray, n_boot: int = 200, seed: int = 0) -> float:
    """RMS trace distance between bootstrap resamples and the empirical state."""
    S = np.asarray(states)
    rng = make_rng(seed)
    base = empirical_state(S)
    dists = []
    for _ in range(n_boot):
        idx = rng.integers(len(S), size=len(S))
        dists.append(trace_norm(empirical_state(S[idx]) - base))
    return float(np.sqrt(np.mean(np.square(dists))))
