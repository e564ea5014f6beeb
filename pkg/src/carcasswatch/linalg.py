"""Sparse symmetric factorization utilities on top of CHOLMOD.

Everything the inference stack needs from a precision matrix Q: solves,
log-determinants, zero-mean GMRF samples, and the diagonal of Q^{-1}.
Matrices come in as scipy sparse, vectors as numpy arrays; cvxopt types
stay internal to this module.
"""

from __future__ import annotations

import numpy as np
from cvxopt import cholmod, matrix, spmatrix
from scipy import sparse


class FactorizationError(ArithmeticError):
    """The matrix is not positive definite within the allowed jitter."""


def _lower_triangle(Q: sparse.spmatrix) -> spmatrix:
    low = sparse.tril(sparse.csc_matrix(Q)).tocoo()
    return spmatrix(
        low.data.astype(float),
        low.row.astype(int).tolist(),
        low.col.astype(int).tolist(),
        size=Q.shape,
    )


class CholeskyFactor:
    """Cholesky factorization P Q P' = L L' of a sparse SPD matrix."""

    def __init__(self, Q: sparse.spmatrix, jitter: float = 0.0, max_jitter: float = 1e-8):
        n = Q.shape[0]
        if Q.shape[1] != n:
            raise ValueError("precision matrix must be square")
        self.n = n
        current = jitter
        while True:
            A = _lower_triangle(
                Q if current == 0.0 else Q + current * sparse.identity(n)
            )
            self._factor = cholmod.symbolic(A)
            try:
                cholmod.numeric(A, self._factor)
                break
            except ArithmeticError:
                current = max(current * 10.0, 1e-12)
                if current > max_jitter:
                    raise FactorizationError(
                        f"matrix not positive definite (jitter up to {max_jitter})"
                    ) from None
        self.jitter = current

    def log_det(self) -> float:
        d = np.asarray(cholmod.diag(self._factor)).ravel()
        return float(2.0 * np.sum(np.log(d)))

    def _solve_sys(self, b: np.ndarray, sys: int) -> np.ndarray:
        b = np.asarray(b, dtype=float)
        squeeze = b.ndim == 1
        B = matrix(b.reshape(self.n, -1, order="F") if squeeze else b)
        cholmod.solve(self._factor, B, sys=sys)
        out = np.asarray(B).reshape(self.n, -1)
        return out[:, 0] if squeeze else out

    def solve(self, b: np.ndarray) -> np.ndarray:
        """Q x = b for one vector or a matrix of right-hand sides."""
        return self._solve_sys(b, sys=0)

    def sample(self, rng: np.random.Generator, size: int = 1) -> np.ndarray:
        """Zero-mean draws with precision Q, shape (size, n).

        With P Q P' = L L', the draw is x = P' L^{-T} z so that
        x' Q x = z' z for standard normal z.
        """
        z = rng.standard_normal((self.n, size))
        half = self._solve_sys(z, sys=5)  # L^T w = z
        out = self._solve_sys(half, sys=8)  # x = P' w
        return out.T

    def inverse_diagonal(self, chunk: int = 256) -> np.ndarray:
        """diag(Q^{-1}) via chunked solves against unit vectors."""
        out = np.empty(self.n)
        for start in range(0, self.n, chunk):
            stop = min(start + chunk, self.n)
            rhs = np.zeros((self.n, stop - start))
            rhs[np.arange(start, stop), np.arange(stop - start)] = 1.0
            sol = self.solve(rhs)
            out[start:stop] = sol[np.arange(start, stop), np.arange(stop - start)]
        return out


def log_det(Q: sparse.spmatrix, jitter: float = 0.0) -> float:
    return CholeskyFactor(Q, jitter=jitter).log_det()


def solve(Q: sparse.spmatrix, b: np.ndarray, jitter: float = 0.0) -> np.ndarray:
    return CholeskyFactor(Q, jitter=jitter).solve(b)
