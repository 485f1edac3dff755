"""Trace norms and induced trace-norm estimates for superoperators."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.optimize import minimize

from .superop import Superoperator


def trace_norm(M: np.ndarray) -> float:
    M = np.asarray(M)
    if np.allclose(M, M.conj().T, atol=1e-14, rtol=0):
        return float(np.abs(np.linalg.eigvalsh(0.5 * (M + M.conj().T))).sum())
    return float(np.linalg.svd(M, compute_uv=False).sum())


def trace_norm_witness(M: np.ndarray):
    """Unitary U with tr(M U) = ||M||_1 (from the SVD M = W S V^dag, U = V W^dag)."""
    W, s, Vh = np.linalg.svd(M)
    return Vh.conj().T @ W.conj().T, float(s.sum())


def hs_inner(A, B) -> complex:
    return complex(np.vdot(A, B))


@dataclass(frozen=True)
class NormEstimate:
    value: float
    restarts: int
    tol: float
    argmax: np.ndarray


def _batched_trace_norm(out: np.ndarray) -> np.ndarray:
    herm = 0.5 * (out + out.conj().transpose(0, 2, 1))
    return np.abs(np.linalg.eigvalsh(herm)).sum(axis=1)


def induced_norm_estimate(
    S: Superoperator, restarts: int = 512, seed: int = 0, refine: int = 8, tol: float = 1e-10
) -> NormEstimate:
    """Lower estimate of the trace-norm-induced norm of a Hermiticity-preserving map.

    The supremum over the trace-norm unit ball is attained on rank-one inputs
    psi psi^dag, so we maximise ||S(psi psi^dag)||_1 over unit vectors: random
    starts, then local refinement of the best few.
    """
    d = S.dim
    rng = np.random.Generator(np.random.Philox(seed))
    psi = rng.normal(size=(restarts, d)) + 1j * rng.normal(size=(restarts, d))
    psi /= np.linalg.norm(psi, axis=1, keepdims=True)
    basis = np.eye(d, dtype=complex)
    psi = np.vstack([psi, basis])  # computational basis states are cheap extra candidates
    rho = np.einsum("ti,tj->tij", psi, psi.conj())
    vecs = rho.transpose(0, 2, 1).reshape(len(psi), -1)
    out = (vecs @ S.matrix.T).reshape(len(psi), d, d).transpose(0, 2, 1)
    vals = _batched_trace_norm(out)
    order = np.argsort(vals)[::-1][:refine]
    best, arg = float(vals[order[0]]), psi[order[0]]

    def objective(x):
        p = x[:d] + 1j * x[d:]
        nrm = np.linalg.norm(p)
        if nrm == 0:
            return 0.0
        p = p / nrm
        return -float(np.abs(np.linalg.eigvalsh(_herm(S.apply(np.outer(p, p.conj()))))).sum())

    for k in order:
        x0 = np.concatenate([psi[k].real, psi[k].imag])
        res = minimize(objective, x0, method="Nelder-Mead", options={"xatol": 1e-9, "fatol": tol, "maxiter": 4000})
        if -res.fun > best:
            best = float(-res.fun)
            p = res.x[:d] + 1j * res.x[d:]
            arg = p / np.linalg.norm(p)
    return NormEstimate(best, restarts, tol, arg)


def _herm(M):
    return 0.5 * (M + M.conj().T)


def sigma_inner(M, N, sigma) -> complex:
    """<M, N>_sigma = tr(sigma^{1/2} M^dag sigma^{1/2} N)."""
    s = matrix_power_psd(sigma, 0.5)
    return complex(np.trace(s @ M.conj().T @ s @ N))


def matrix_power_psd(A: np.ndarray, p: float) -> np.ndarray:
    w, v = np.linalg.eigh(_herm(A))
    return (v * w**p) @ v.conj().T

