"""Consensus weight matrix built from the control-penalty vector.

The penalty vector a (one positive entry per agent) defines both the
weighted control-energy cost and the matrix that couples the agents in
every synthesized controller:

    L(a) = I_N - (sum_i a_i)^(-1) 1_N a^T

L(a) has a single zero eigenvalue (right eigenvector 1_N, left eigenvector
a^T) and N-1 eigenvalues equal to one, and it factors as -V1^T V2^(-1) V3
with the matrices returned by :func:`factor_matrices`.
"""

from __future__ import annotations

import numpy as np

__all__ = [
    "check_weights",
    "alpha",
    "consensus_weight_matrix",
    "factor_matrices",
    "verify_factorization",
]


def check_weights(a) -> np.ndarray:
    """Validate and return the penalty vector as a 1-d float array."""
    a = np.atleast_1d(np.asarray(a, dtype=float))
    if a.ndim != 1:
        raise ValueError("weights must be a vector")
    if a.size < 2:
        raise ValueError("need at least two agents (weights)")
    if not np.all(np.isfinite(a)):
        raise ValueError("weights must be finite")
    if np.any(a <= 0.0):
        bad = int(np.argmin(a))
        raise ValueError(f"weights must be positive (a[{bad}] = {a[bad]})")
    return a


def alpha(a) -> float:
    """Normalization constant 1 / sum(a)."""
    a = check_weights(a)
    return 1.0 / float(np.sum(a))


def consensus_weight_matrix(a) -> np.ndarray:
    """Weight matrix L(a) = I - (sum a)^(-1) 1 a^T.

    Rows of the rank-one part sum to one, so L(a) @ 1 = 0; the remaining
    spectrum sits at one. Scaling a by any positive constant leaves L(a)
    unchanged.
    """
    a = check_weights(a)
    n = a.size
    return np.eye(n) - np.outer(np.ones(n), a) / np.sum(a)


def factor_matrices(a):
    """Factorization blocks (V1, V2, V3) of the weight matrix.

    V1 selects inverse-weighted differences against agent 1, V2 is the
    symmetric positive definite Gram matrix of those directions and V3 is
    the plain difference map [-1, I]. They satisfy
    L(a) = -V1^T V2^(-1) V3.
    """
    a = check_weights(a)
    n = a.size
    inv_rest = 1.0 / a[1:]
    v1 = np.hstack([np.full((n - 1, 1), 1.0 / a[0]), -np.diag(inv_rest)])
    v2 = np.diag(inv_rest) + np.full((n - 1, n - 1), 1.0 / a[0])
    v3 = np.hstack([-np.ones((n - 1, 1)), np.eye(n - 1)])
    return v1, v2, v3


def verify_factorization(a, tol: float = 1e-10) -> float:
    """Frobenius residual of L(a) + V1^T V2^(-1) V3.

    Returns the residual; callers assert it against their tolerance.
    """
    if not tol > 0.0:
        raise ValueError("tol must be positive")
    v1, v2, v3 = factor_matrices(a)
    lhs = consensus_weight_matrix(a)
    return float(np.linalg.norm(lhs + v1.T @ np.linalg.solve(v2, v3)))
