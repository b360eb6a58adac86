"""Asymptotic output-consensus laws via Riccati and observer equations.

The finite-horizon matrix P(t,T) = e^(A^T(T-t)) C^T W(t,T)^(-1) e-factor
satisfies the differential Riccati equation

    dP/dt = -A^T P - P A + P B B^T P

whose stationary solutions solve -A^T P0 - P0 A + P0 B B^T P0 = 0. When
(A, B) is stabilizable and A has no imaginary-axis eigenvalue, P(t,T)
converges to the stabilizing positive semidefinite solution P0 as the
horizon recedes, giving the constant asymptotic consensus gains. A dual
equation A Q + Q A^T = -Q C^T C Q with Q <= 0 yields the observer used by
the dynamic output law.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import scipy.linalg

from .errors import (
    ImaginaryAxisEigenvalueError,
    KernelNotInvariantError,
    NotDetectableError,
    NotOutputControllableError,
    NotStabilizableError,
)
from .gramian import LtiSystem, is_kernel_A_invariant, output_gramian
from .laws import ObserverLaw
from .linalg import QuadratureConfig, as_matrix, kron, mat_exp
from .weights import check_weights, consensus_weight_matrix

__all__ = [
    "RiccatiSolution",
    "ObserverDesign",
    "solve_are",
    "solve_dre",
    "asymptotic_state_gain",
    "asymptotic_output_gain",
    "solve_observer_are",
    "observer_consensus_law",
]


@dataclass(frozen=True)
class RiccatiSolution:
    """Stabilizing solution of -A^T P - P A + P B B^T P = 0.

    P0 is symmetric positive semidefinite and vanishes on the stable
    subspace of A (directions that need no control carry no cost).
    """

    P0: np.ndarray
    residual: float
    closed_loop_spectrum: np.ndarray
    A: np.ndarray = field(repr=False, default=None)
    B: np.ndarray = field(repr=False, default=None)


@dataclass(frozen=True)
class ObserverDesign:
    """Solution Q <= 0 of A Q + Q A^T = -Q C^T C Q with stable error dynamics.

    The estimation error obeys e' = (A + Q C^T C) e, whose spectrum is the
    stable part of A together with the mirrored antistable part.
    """

    Q: np.ndarray
    residual: float
    error_spectrum: np.ndarray
    A: np.ndarray = field(repr=False, default=None)
    C: np.ndarray = field(repr=False, default=None)


def _reject_imaginary_axis(A, axis_tol):
    eigs = np.linalg.eigvals(A)
    scale = max(np.linalg.norm(A), 1.0)
    closest = float(np.min(np.abs(eigs.real)))
    if closest < axis_tol * scale:
        raise ImaginaryAxisEigenvalueError(
            f"eigenvalue with |Re| = {closest:.2e} is numerically on the "
            "imaginary axis; the stabilizing Riccati solution needs "
            "|Re(eig(A))| bounded away from zero")
    return eigs


def _check_pbh(A, B, eigs, error_cls, what):
    n = A.shape[0]
    scale = max(np.linalg.norm(A), np.linalg.norm(B), 1.0)
    for lam in eigs:
        if lam.real <= 0.0:
            continue
        pencil = np.hstack([A - lam * np.eye(n), B]).astype(complex)
        smin = np.linalg.svd(pencil, compute_uv=False)[-1]
        if smin < 1e-8 * scale:
            raise error_cls(
                f"antistable mode at {lam:.4g} is {what}")


def solve_are(A, B, axis_tol: float = 1e-6) -> RiccatiSolution:
    """Stabilizing solution via the ordered Schur form of the Hamiltonian.

    With zero state cost the Hamiltonian [[A, -B B^T], [0, -A^T]] is block
    triangular; the basis [X1; X2] of its stable invariant subspace gives
    P0 = X2 X1^(-1), refined by one Newton (Kleinman) step.
    """
    A = as_matrix(A, "A")
    B = as_matrix(B, "B")
    n = A.shape[0]
    if A.shape[1] != n:
        raise ValueError("A must be square")
    if B.shape[0] != n:
        raise ValueError("B row count must match A")
    eigs = _reject_imaginary_axis(A, axis_tol)
    _check_pbh(A, B, eigs, NotStabilizableError, "uncontrollable")

    bbt = B @ B.T
    ham = np.zeros((2 * n, 2 * n))
    ham[:n, :n] = A
    ham[:n, n:] = -bbt
    ham[n:, n:] = -A.T
    _, z, sdim = scipy.linalg.schur(ham, output="real", sort="lhp")
    if sdim != n:
        raise ImaginaryAxisEigenvalueError(
            f"stable invariant subspace has dimension {sdim}, expected {n}")
    x1 = z[:n, :n]
    x2 = z[n:, :n]
    if np.linalg.cond(x1) > 1e12:
        raise NotStabilizableError(
            "stable subspace basis is rank deficient; (A, B) is not stabilizable")
    p = x2 @ np.linalg.inv(x1)
    p = 0.5 * (p + p.T)

    def riccati_residual(pm):
        return float(np.linalg.norm(A.T @ pm + pm @ A - pm @ bbt @ pm))

    # One Newton (Kleinman) refinement step; keep it only if it helps.
    closed = A - bbt @ p
    try:
        refined = scipy.linalg.solve_continuous_lyapunov(closed.T, -p @ bbt @ p)
        refined = 0.5 * (refined + refined.T)
        if riccati_residual(refined) < riccati_residual(p):
            p = refined
    except (np.linalg.LinAlgError, ValueError):
        pass

    spectrum = np.sort_complex(np.linalg.eigvals(A - bbt @ p))
    return RiccatiSolution(P0=p, residual=riccati_residual(p),
                           closed_loop_spectrum=spectrum, A=A, B=B)


def solve_dre(sys: LtiSystem, t: float, T: float,
              cfg: QuadratureConfig | None = None) -> np.ndarray:
    """Finite-horizon P(t,T) = e^(A^T(T-t)) C^T W(t,T)^(-1) C e^(A(T-t))."""
    w = output_gramian(sys, t, T, cfg).value
    eigs = np.linalg.eigvalsh(w)
    if eigs[-1] <= 0.0 or eigs[0] <= 1e-14 * eigs[-1]:
        raise NotOutputControllableError(
            f"W({t:g}, {T:g}) is singular; P(t,T) is undefined")
    phi = mat_exp(sys.A, T - t)
    p = phi.T @ sys.C.T @ np.linalg.solve(w, sys.C @ phi)
    return 0.5 * (p + p.T)


def asymptotic_state_gain(a, sol: RiccatiSolution) -> np.ndarray:
    """Constant gain K = L(a) (x) (B^T P0) for u = -K x."""
    a = check_weights(a)
    return kron(consensus_weight_matrix(a), sol.B.T @ sol.P0)


def asymptotic_output_gain(a, sys: LtiSystem, sol: RiccatiSolution) -> np.ndarray:
    """Constant gain K_y = L(a) (x) (B^T C^T G0) for u = -K_y y.

    G0 = (C C^T)^(-1) C P0 C^T (C C^T)^(-1). Requires ker(C) A-invariant;
    the output law reproduces the state law exactly when ker(C) also lies
    in the stable subspace of A (so that C^T G0 C = P0).
    """
    a = check_weights(a)
    if not is_kernel_A_invariant(sys):
        raise KernelNotInvariantError(
            "asymptotic output feedback needs ker(C) A-invariant")
    cct = sys.C @ sys.C.T
    inner = np.linalg.solve(cct, sys.C @ sol.P0 @ sys.C.T)
    g0 = np.linalg.solve(cct, inner.T).T
    g0 = 0.5 * (g0 + g0.T)
    return kron(consensus_weight_matrix(a), sys.B.T @ sys.C.T @ g0)


def solve_observer_are(A, C, axis_tol: float = 1e-6) -> ObserverDesign:
    """Observer covariance Q <= 0 by duality with the control Riccati equation.

    The substitution S = -Q turns A Q + Q A^T = -Q C^T C Q into the dual
    equation A S + S A^T - S C^T C S = 0, solved with the same Hamiltonian
    machinery applied to (A^T, C^T). A + Q C^T C is then Hurwitz.
    """
    A = as_matrix(A, "A")
    C = as_matrix(C, "C")
    eigs = _reject_imaginary_axis(A, axis_tol)
    _check_pbh(A.T, C.T, eigs.conj(), NotDetectableError, "unobservable")
    try:
        dual = solve_are(A.T, C.T, axis_tol=axis_tol)
    except NotStabilizableError as exc:
        raise NotDetectableError(str(exc)) from exc
    q = -dual.P0
    residual = float(np.linalg.norm(A @ q + q @ A.T + q @ C.T @ C @ q))
    spectrum = np.sort_complex(np.linalg.eigvals(A + q @ C.T @ C))
    return ObserverDesign(Q=q, residual=residual, error_spectrum=spectrum,
                          A=A, C=C)


def observer_consensus_law(a, sys: LtiSystem, sol: RiccatiSolution,
                           obs: ObserverDesign) -> ObserverLaw:
    """Dynamic output law of the observer kind (see ObserverLaw).

    Each agent estimates its deviation from the weighted team average with
    the observer gain Q and applies u_i = -B^T P0 on the estimate.
    """
    a = check_weights(a)
    if sol.P0.shape != (sys.n, sys.n):
        raise ValueError("Riccati solution does not match the system dimension")
    if obs.Q.shape != (sys.n, sys.n):
        raise ValueError("observer design does not match the system dimension")
    return ObserverLaw(sys, a, sol.P0, obs.Q)
