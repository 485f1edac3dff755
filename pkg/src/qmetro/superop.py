"""Dense superoperators on d x d matrices.

Convention used everywhere: column stacking, ``vec(X)[i + d*j] = X[i, j]``, so
``vec(A X B) = (B.T kron A) vec(X)`` and a Kraus map ``X -> K X K^dag``
has matrix ``conj(K) kron K``.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ValidationError


def vec(X: np.ndarray) -> np.ndarray:
    return np.asarray(X).reshape(-1, order="F")


def unvec(v: np.ndarray, d: int | None = None) -> np.ndarray:
    v = np.asarray(v)
    if d is None:
        d = int(round(np.sqrt(v.shape[0])))
    return v.reshape(d, d, order="F")


@dataclass(frozen=True)
class Superoperator:
    matrix: np.ndarray

    def __post_init__(self):
        m = np.asarray(self.matrix, dtype=complex)
        d = int(round(np.sqrt(m.shape[0])))
        if m.ndim != 2 or m.shape != (d * d, d * d):
            raise ValidationError(f"bad superoperator shape {m.shape}")
        object.__setattr__(self, "matrix", m)

    @property
    def dim(self) -> int:
        return int(round(np.sqrt(self.matrix.shape[0])))

    @classmethod
    def identity(cls, d: int) -> "Superoperator":
        return cls(np.eye(d * d, dtype=complex))

    @classmethod
    def from_kraus(cls, kraus) -> "Superoperator":
        K = np.asarray(kraus)
        if K.ndim == 2:
            K = K[None]
        d = K.shape[1]
        # S[(a + d b), (i + d j)] = sum_x K[x,a,i] conj(K[x,b,j])
        S = np.einsum("xai,xbj->baji", K, K.conj())
        return cls(S.reshape(d * d, d * d))

    @classmethod
    def left_right(cls, A: np.ndarray, B: np.ndarray) -> "Superoperator":
        """X -> A X B."""
        return cls(np.kron(B.T, A))

    def apply(self, X: np.ndarray) -> np.ndarray:
        return unvec(self.matrix @ vec(X), self.dim)

    def __call__(self, X):
        return self.apply(X)

    def __matmul__(self, other: "Superoperator") -> "Superoperator":
        return Superoperator(self.matrix @ other.matrix)

    def __add__(self, other: "Superoperator") -> "Superoperator":
        return Superoperator(self.matrix + other.matrix)

    def __sub__(self, other: "Superoperator") -> "Superoperator":
        return Superoperator(self.matrix - other.matrix)

    def __mul__(self, c) -> "Superoperator":
        return Superoperator(self.matrix * c)

    __rmul__ = __mul__

    def __neg__(self):
        return Superoperator(-self.matrix)

    def power(self, k: int) -> "Superoperator":
        return Superoperator(np.linalg.matrix_power(self.matrix, k))

    def adjoint(self) -> "Superoperator":
        """Hilbert-Schmidt dual."""
        return Superoperator(self.matrix.conj().T)

    def change_basis(self, V: np.ndarray) -> "Superoperator":
        """Superoperator acting on V X V^dag given this one acts on X."""
        T = np.kron(V.conj(), V)
        Tinv = np.kron(V.T, V.conj().T)
        return Superoperator(T @ self.matrix @ Tinv)

    def choi(self) -> np.ndarray:
        """Choi matrix sum_ij |i><j| kron E(|i><j|)."""
        d = self.dim
        S4 = self.matrix.reshape(d, d, d, d)  # axes (b, a, j, i)
        return S4.transpose(3, 1, 2, 0).reshape(d * d, d * d)

    def choi_min_eigenvalue(self) -> float:
        C = self.choi()
        return float(np.linalg.eigvalsh(0.5 * (C + C.conj().T))[0])

    def trace_preservation_error(self) -> float:
        d = self.dim
        diag = np.arange(d) * (d + 1)
        row = self.matrix[diag, :].sum(axis=0)
        return float(np.max(np.abs(row - vec(np.eye(d)))))

    def kraus(self, tol: float = 0.0) -> np.ndarray:
        """Kraus operators from the eigendecomposition of the Choi matrix."""
        d = self.dim
        C = self.choi()
        w, v = np.linalg.eigh(0.5 * (C + C.conj().T))
        keep = w > tol
        K = np.sqrt(w[keep])[:, None] * v[:, keep].T  # rows indexed (i, a)
        return K.reshape(-1, d, d).transpose(0, 2, 1)

    def max_abs_diff(self, other: "Superoperator") -> float:
        return float(np.max(np.abs(self.matrix - other.matrix)))
