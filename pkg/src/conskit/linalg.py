"""Dense-matrix numerical primitives shared by the controller modules.

Matrix exponential, adaptive matrix-valued Gauss-Legendre quadrature,
Kronecker products and orthonormal nullspace bases. All functions are pure
and operate on plain numpy arrays.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np
import scipy.linalg

from .errors import NonSquareMatrixError, ToleranceNotMetError

__all__ = [
    "QuadratureConfig",
    "as_matrix",
    "mat_exp",
    "integrate_matrix",
    "kron",
    "nullspace_basis",
]


@dataclass(frozen=True)
class QuadratureConfig:
    """Settings for the composite adaptive Gauss-Legendre rule.

    nodes_per_panel: Gauss-Legendre nodes per panel (exact for polynomials
        of degree < 2 * nodes_per_panel).
    rel_tol: target relative Frobenius error of the result.
    max_bisections: maximum panel bisection depth before giving up.
    """

    nodes_per_panel: int = 10
    rel_tol: float = 1e-12
    max_bisections: int = 20

    def __post_init__(self):
        if self.nodes_per_panel < 2:
            raise ValueError("nodes_per_panel must be >= 2")
        if not self.rel_tol > 0.0:
            raise ValueError("rel_tol must be positive")
        if self.max_bisections < 1:
            raise ValueError("max_bisections must be >= 1")


def as_matrix(value, name: str = "matrix") -> np.ndarray:
    """Coerce to a 2-d float array and reject non-finite entries."""
    m = np.atleast_2d(np.asarray(value, dtype=float))
    if m.ndim != 2:
        raise ValueError(f"{name} must be two-dimensional, got shape {m.shape}")
    if not np.all(np.isfinite(m)):
        raise ValueError(f"{name} contains NaN or Inf entries")
    return m


def mat_exp(M, t: float = 1.0) -> np.ndarray:
    """Matrix exponential e^(M t).

    Uses scaling-and-squaring with Pade approximants (degree <= 13), which
    is robust for the moderate norms that arise in desk-scale systems.
    """
    M = as_matrix(M, "M")
    if M.shape[0] != M.shape[1]:
        raise NonSquareMatrixError(
            f"matrix exponential needs a square matrix, got {M.shape}"
        )
    if not np.isfinite(t):
        raise ValueError("t must be finite")
    return scipy.linalg.expm(M * t)


def _gl_panel(f, lo, hi, nodes, weights):
    mid = 0.5 * (lo + hi)
    half = 0.5 * (hi - lo)
    acc = None
    for xi, wi in zip(nodes, weights):
        value = np.asarray(f(mid + half * xi), dtype=float)
        acc = wi * value if acc is None else acc + wi * value
    return half * acc


def integrate_matrix(
    f: Callable[[float], np.ndarray],
    t0: float,
    t1: float,
    cfg: QuadratureConfig | None = None,
) -> np.ndarray:
    """Integrate a matrix-valued function over [t0, t1].

    Composite Gauss-Legendre quadrature with adaptive panel bisection: a
    panel is accepted once the change under bisection drops below its
    share of the relative Frobenius tolerance.

    Raises ToleranceNotMetError when max_bisections levels are exhausted.
    """
    cfg = cfg or QuadratureConfig()
    if t0 > t1:
        raise ValueError("integration interval is reversed (t0 > t1)")
    if t0 == t1:
        return np.zeros_like(np.asarray(f(t0), dtype=float))

    nodes, weights = np.polynomial.legendre.leggauss(cfg.nodes_per_panel)
    whole = _gl_panel(f, t0, t1, nodes, weights)
    scale = np.linalg.norm(whole)
    span = t1 - t0

    def refine(lo, hi, coarse, depth):
        mid = 0.5 * (lo + hi)
        left = _gl_panel(f, lo, mid, nodes, weights)
        right = _gl_panel(f, mid, hi, nodes, weights)
        fine = left + right
        budget = cfg.rel_tol * scale * (hi - lo) / span
        err = np.linalg.norm(fine - coarse)
        if err <= max(budget, cfg.rel_tol * np.linalg.norm(fine)):
            return fine
        if depth >= cfg.max_bisections:
            raise ToleranceNotMetError(
                f"quadrature did not converge on [{lo}, {hi}] after "
                f"{cfg.max_bisections} bisections (error estimate {err:.3e})"
            )
        return refine(lo, mid, left, depth + 1) + refine(mid, hi, right, depth + 1)

    return refine(t0, t1, whole, 0)


def kron(A, B) -> np.ndarray:
    """Kronecker product with shape (rA*rB) x (cA*cB)."""
    return np.kron(as_matrix(A, "A"), as_matrix(B, "B"))


def nullspace_basis(M, rel_tol: float | None = None) -> np.ndarray:
    """Orthonormal basis of the numerical kernel of M, as columns.

    A direction v belongs to the kernel when ||M v|| <= tol * ||M|| * ||v||.
    The default tolerance is eps * max(rows, cols) * sigma_max, the usual
    numerical-rank convention. Returns an (n, 0) array for a trivial kernel.
    """
    M = as_matrix(M, "M")
    if rel_tol is not None and not rel_tol > 0.0:
        raise ValueError("rel_tol must be positive")
    _, sigma, vt = np.linalg.svd(M)
    if sigma.size == 0:
        return np.eye(M.shape[1])
    smax = sigma[0]
    if rel_tol is None:
        rel_tol = np.finfo(float).eps * max(M.shape)
    rank = int(np.sum(sigma > rel_tol * smax)) if smax > 0.0 else 0
    return vt[rank:].T.copy()
