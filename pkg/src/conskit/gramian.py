"""Output controllability Gramians and the kernel-invariance machinery.

For a plant (A, B, C) the finite-horizon output controllability Gramian is

    W(t, T) = int_t^T C e^(A(T-s)) B B^T e^(A^T(T-s)) C^T ds

and the reversed-time companion used by output feedback is

    G(t, T) = int_0^(T-t) C e^(-A r) B B^T e^(-A^T r) C^T dr.

Both are symmetric positive semidefinite; W is nonsingular exactly when
the plant is output controllable over the interval. When ker(C) is
A-invariant the two are linked by

    e^(A^T d) C^T W(t,T)^(-1) C e^(A d) = C^T G(t,T)^(-1) C,   d = T - t,

which is what lets the state-feedback consensus law collapse to an output
feedback law.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import (
    DegenerateIntervalError,
    KernelNotInvariantError,
    SingularInnerMatrixError,
)
from .linalg import QuadratureConfig, as_matrix, integrate_matrix, mat_exp, nullspace_basis

__all__ = [
    "LtiSystem",
    "GramianResult",
    "output_gramian",
    "related_gramian",
    "expm_with_gramian",
    "is_output_controllable",
    "is_kernel_A_invariant",
    "projection_identity_residual",
]


@dataclass(frozen=True)
class LtiSystem:
    """One agent's plant: dx = A x + B u, y = C x.

    B must have full column rank and C full row rank; dimensions are
    checked on construction and the arrays are frozen afterwards.
    """

    A: np.ndarray
    B: np.ndarray
    C: np.ndarray

    def __post_init__(self):
        A = as_matrix(self.A, "A")
        B = as_matrix(self.B, "B")
        C = as_matrix(self.C, "C")
        n = A.shape[0]
        if A.shape[1] != n:
            raise ValueError(f"A must be square, got {A.shape}")
        if B.shape[0] != n:
            raise ValueError(f"B has {B.shape[0]} rows, expected {n}")
        if C.shape[1] != n:
            raise ValueError(f"C has {C.shape[1]} columns, expected {n}")
        if np.linalg.matrix_rank(B) != B.shape[1]:
            raise ValueError("B must have full column rank")
        if np.linalg.matrix_rank(C) != C.shape[0]:
            raise ValueError("C must have full row rank")
        for name, m in (("A", A), ("B", B), ("C", C)):
            m.flags.writeable = False
            object.__setattr__(self, name, m)

    @property
    def n(self) -> int:
        return self.A.shape[0]

    @property
    def m(self) -> int:
        return self.B.shape[1]

    @property
    def p(self) -> int:
        return self.C.shape[0]


@dataclass(frozen=True)
class GramianResult:
    """A computed Gramian with its interval and conditioning estimate."""

    value: np.ndarray
    interval: tuple[float, float]
    condition_estimate: float = field(default=np.inf)

    @staticmethod
    def from_raw(raw: np.ndarray, interval) -> "GramianResult":
        # Integrands are symmetric, so any asymmetry is pure roundoff.
        asym = np.linalg.norm(raw - raw.T) / max(np.linalg.norm(raw), 1e-300)
        if asym > 1e-10:
            raise SingularInnerMatrixError(
                f"gramian asymmetry {asym:.2e} exceeds roundoff plausibility"
            )
        value = 0.5 * (raw + raw.T)
        eigs = np.linalg.eigvalsh(value)
        lo, hi = float(eigs[0]), float(eigs[-1])
        cond = np.inf if lo <= 0.0 else hi / lo
        value.flags.writeable = False
        return GramianResult(value=value, interval=tuple(interval), condition_estimate=cond)


def _check_interval(t, T):
    if not (np.isfinite(t) and np.isfinite(T)):
        raise DegenerateIntervalError("interval endpoints must be finite")
    if t >= T:
        raise DegenerateIntervalError(f"need t < T, got [{t}, {T}]")


def output_gramian(sys: LtiSystem, t: float, T: float,
                   cfg: QuadratureConfig | None = None) -> GramianResult:
    """W(t, T) by adaptive quadrature of C e^(A(T-s)) B B^T e^(A^T(T-s)) C^T."""
    _check_interval(t, T)

    def integrand(s):
        m = sys.C @ mat_exp(sys.A, T - s) @ sys.B
        return m @ m.T

    raw = integrate_matrix(integrand, t, T, cfg)
    return GramianResult.from_raw(raw, (t, T))


def related_gramian(sys: LtiSystem, t: float, T: float,
                    cfg: QuadratureConfig | None = None) -> GramianResult:
    """G(t, T) by adaptive quadrature of C e^(-A r) B B^T e^(-A^T r) C^T."""
    _check_interval(t, T)

    def integrand(r):
        m = sys.C @ mat_exp(sys.A, -r) @ sys.B
        return m @ m.T

    raw = integrate_matrix(integrand, 0.0, T - t, cfg)
    return GramianResult.from_raw(raw, (t, T))


def expm_with_gramian(A, B, delta: float):
    """Closed-form pair (e^(A*delta), int_0^delta e^(A r) B B^T e^(A^T r) dr).

    Both come out of a single exponential of the augmented block matrix
    [[A, B B^T], [0, -A^T]]: with its exponential partitioned as
    [[F, G], [0, H]], the integral equals G @ H^(-1) and F is the
    transition matrix. Exact to machine precision, so it is safe inside
    per-timestep feedback-gain evaluation where quadrature would be
    needlessly slow.
    """
    A = as_matrix(A, "A")
    B = as_matrix(B, "B")
    n = A.shape[0]
    aug = np.zeros((2 * n, 2 * n))
    aug[:n, :n] = A
    aug[:n, n:] = B @ B.T
    aug[n:, n:] = -A.T
    big = mat_exp(aug, delta)
    phi = big[:n, :n]
    gram = big[:n, n:] @ mat_exp(A.T, delta)
    return phi, 0.5 * (gram + gram.T)


def is_output_controllable(sys: LtiSystem, horizon: float, tol: float = 1e-9) -> bool:
    """True when W(0, horizon) is nonsingular relative to its largest eigenvalue."""
    if not horizon > 0.0:
        raise ValueError("horizon must be positive")
    w = output_gramian(sys, 0.0, horizon).value
    eigs = np.linalg.eigvalsh(w)
    if eigs[-1] <= 0.0:
        return False
    return bool(eigs[0] > tol * eigs[-1])


def is_kernel_A_invariant(sys: LtiSystem, tol: float = 1e-9) -> bool:
    """True when A maps ker(C) into itself (vacuously true for trivial kernel)."""
    kernel = nullspace_basis(sys.C)
    if kernel.shape[1] == 0:
        return True
    leak = np.linalg.norm(sys.C @ (sys.A @ kernel))
    return bool(leak <= tol * max(np.linalg.norm(sys.A), 1e-300))


def projection_identity_residual(C, P, W) -> float:
    """Residual of P^T C^T (C P W P^T C^T)^(-1) C P = C^T (C W C^T)^(-1) C.

    The identity holds whenever C has full row rank, P is nonsingular and
    ker(C) is P-invariant. Raises KernelNotInvariantError when the
    invariance precondition fails and SingularInnerMatrixError when either
    inner matrix cannot be inverted.
    """
    C = as_matrix(C, "C")
    P = as_matrix(P, "P")
    W = as_matrix(W, "W")
    kernel = nullspace_basis(C)
    if kernel.shape[1] > 0:
        leak = np.linalg.norm(C @ (P @ kernel))
        if leak > 1e-9 * max(np.linalg.norm(P), 1e-300):
            raise KernelNotInvariantError(
                f"ker(C) is not P-invariant (leak {leak:.2e})"
            )
    cp = C @ P
    inner_left = cp @ W @ cp.T
    inner_right = C @ W @ C.T
    try:
        left = cp.T @ np.linalg.solve(inner_left, cp)
        right = C.T @ np.linalg.solve(inner_right, C)
    except np.linalg.LinAlgError as exc:
        raise SingularInnerMatrixError(str(exc)) from exc
    return float(np.linalg.norm(left - right))
