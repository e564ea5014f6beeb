"""Sparse precision builders: AR(1), RW(1), and grouped Kronecker fields.

All structures are returned as :class:`SparsePrecision`, which carries
the matrix plus its declared rank deficiency and linear constraints so
downstream factorizations can regularize deterministically.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy import sparse


class GmrfDomainError(ValueError):
    """Structural parameter outside its domain (e.g. |rho| >= 1)."""


@dataclass(frozen=True)
class SparsePrecision:
    """Symmetric PSD precision with optional linear constraints.

    ``constraints`` rows a satisfy a @ x = 0 for the intended field; the
    matrix is positive definite on that constrained subspace.
    """

    matrix: sparse.csc_matrix = field(compare=False)
    rank_deficiency: int = 0
    constraints: np.ndarray | None = None

    @property
    def dimension(self) -> int:
        return self.matrix.shape[0]

    def constrained_matrix(self, weight: float) -> sparse.csc_matrix:
        """Q + weight * sum_k a_k a_k', SPD when weight > 0 covers the null space."""
        if self.constraints is None:
            return self.matrix
        A = sparse.csc_matrix(self.constraints)
        return (self.matrix + weight * (A.T @ A)).tocsc()


def ar1_precision(n: int, rho: float, marginal_prec: float = 1.0) -> SparsePrecision:
    """Stationary AR(1) precision with covariance rho^|i-j| / marginal_prec."""
    if n < 1:
        raise GmrfDomainError(f"n must be >= 1, got {n}")
    if not abs(rho) < 1.0:
        raise GmrfDomainError(f"|rho| must be < 1, got {rho}")
    if marginal_prec <= 0:
        raise GmrfDomainError(f"marginal_prec must be positive, got {marginal_prec}")
    if n == 1:
        return SparsePrecision(matrix=sparse.csc_matrix([[marginal_prec]]))
    scale = marginal_prec / (1.0 - rho * rho)
    diag = np.full(n, 1.0 + rho * rho)
    diag[0] = diag[-1] = 1.0
    off = np.full(n - 1, -rho)
    Q = sparse.diags([off, diag, off], offsets=[-1, 0, 1], format="csc") * scale
    return SparsePrecision(matrix=Q.tocsc())


def rw1_precision(n: int, prec: float = 1.0) -> SparsePrecision:
    """First-order random walk precision prec * D'D with sum-to-zero constraint."""
    if n < 2:
        raise GmrfDomainError(f"RW(1) needs n >= 2, got {n}")
    if prec <= 0:
        raise GmrfDomainError(f"prec must be positive, got {prec}")
    D = sparse.diags([-np.ones(n - 1), np.ones(n - 1)], offsets=[0, 1], shape=(n - 1, n))
    Q = (prec * (D.T @ D)).tocsc()
    return SparsePrecision(
        matrix=Q,
        rank_deficiency=1,
        constraints=np.ones((1, n)),
    )


def kron_group(Q_within: SparsePrecision, n_groups: int, group_rho: float) -> SparsePrecision:
    """AR(1)-grouped field: Q_ar1(n_groups, rho) (x) Q_within, group-major.

    The group AR(1) has unit marginal variance so each group keeps the
    within-field's marginal structure.  Within-field constraints are
    replicated per group block.
    """
    if n_groups < 1:
        raise GmrfDomainError(f"n_groups must be >= 1, got {n_groups}")
    Q_g = ar1_precision(n_groups, group_rho, marginal_prec=1.0).matrix
    Q = sparse.kron(Q_g, Q_within.matrix, format="csc")
    constraints = None
    if Q_within.constraints is not None:
        constraints = np.kron(np.eye(n_groups), Q_within.constraints)
    return SparsePrecision(
        matrix=Q,
        rank_deficiency=n_groups * Q_within.rank_deficiency,
        constraints=constraints,
    )


def block_diag(blocks: list[SparsePrecision]) -> SparsePrecision:
    """Stack independent latent blocks into one precision."""
    Q = sparse.block_diag([b.matrix for b in blocks], format="csc")
    n = Q.shape[0]
    rows = []
    offset = 0
    for b in blocks:
        if b.constraints is not None:
            lifted = np.zeros((b.constraints.shape[0], n))
            lifted[:, offset : offset + b.dimension] = b.constraints
            rows.append(lifted)
        offset += b.dimension
    constraints = np.vstack(rows) if rows else None
    return SparsePrecision(
        matrix=Q,
        rank_deficiency=sum(b.rank_deficiency for b in blocks),
        constraints=constraints,
    )
