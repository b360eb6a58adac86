"""Finite-time minimum-energy output-consensus controllers.

Solves: steer N agents dx_i = A x_i + B u_i, y_i = C x_i so that all
outputs coincide at a given time T while minimizing the weighted energy
int sum_i a_i u_i^T u_i dt. The optimal control exists in three equivalent
forms (open loop, state feedback, output feedback when ker(C) is
A-invariant), all built from the weight matrix L(a) and the output
controllability Gramian. A heterogeneous variant steers agents with
different (A_i, B_i, C_i) to a common optimal rendezvous output.
"""

from __future__ import annotations

import numpy as np

from . import asymptotic
from .errors import (
    InitialStateNotInKernelError,
    KernelNotInvariantError,
    NearSingularHorizonError,
    NotOutputControllableError,
)
from .gramian import (
    LtiSystem,
    expm_with_gramian,
    is_kernel_A_invariant,
    is_output_controllable,
    output_gramian,
)
from .laws import (
    AgentLayout,
    ConstantGainLaw,
    ControlLaw,
    HeterogeneousLaw,
    LawKind,
    OpenLoopLaw,
    SwitchedFeedbackLaw,
)
from .linalg import kron, mat_exp
from .weights import alpha, check_weights, consensus_weight_matrix, factor_matrices

__all__ = [
    "FiniteTimeProblem",
    "default_eps_switch",
    "open_loop_control",
    "state_feedback_gain",
    "output_feedback_gain",
    "predict_consensus_point",
    "heterogeneous_controller",
    "optimal_cost",
    "make_control_law",
]

_FINITE_TIME_KINDS = (
    LawKind.OPEN_LOOP_FT,
    LawKind.STATE_FEEDBACK_FT,
    LawKind.OUTPUT_FEEDBACK_FT,
    LawKind.HETEROGENEOUS_FT,
)


class FiniteTimeProblem:
    """Agents, penalty weights, stacked initial state and horizon.

    Pass ``sys`` for a homogeneous team (all agents share one plant) or
    ``systems`` for per-agent plants sharing the output dimension. ``T`` may
    be omitted for problems that only feed asymptotic controllers; all
    finite-time synthesis requires it. When a horizon is given, every agent
    is checked for output controllability over [t0, T] on construction.
    """

    def __init__(self, sys=None, *, systems=None, a, x0, t0=0.0, T=None,
                 controllability_tol=1e-9):
        if (sys is None) == (systems is None):
            raise ValueError("pass exactly one of sys= or systems=")
        self.a = check_weights(a)
        self.homogeneous = systems is None
        if self.homogeneous:
            if not isinstance(sys, LtiSystem):
                raise TypeError("sys must be an LtiSystem")
            self.systems = (sys,) * self.a.size
        else:
            self.systems = tuple(systems)
            if len(self.systems) != self.a.size:
                raise ValueError(
                    f"got {len(self.systems)} systems for {self.a.size} weights")
            if not all(isinstance(s, LtiSystem) for s in self.systems):
                raise TypeError("systems must be LtiSystem instances")
        self.layout = AgentLayout(self.systems)
        self.x0 = np.asarray(x0, dtype=float).ravel()
        if self.x0.size != self.layout.total_states:
            raise ValueError(
                f"x0 has length {self.x0.size}, expected "
                f"{self.layout.total_states} (sum of agent state dimensions)")
        if not np.all(np.isfinite(self.x0)):
            raise ValueError("x0 must be finite")
        self.t0 = float(t0)
        self.T = None if T is None else float(T)
        if self.T is not None:
            if not (np.isfinite(self.T) and np.isfinite(self.t0) and self.T > self.t0):
                raise ValueError("need finite T > t0")
            horizon = self.T - self.t0
            checked = set()
            for i, s in enumerate(self.systems):
                if id(s) in checked:
                    continue
                if not is_output_controllable(s, horizon, tol=controllability_tol):
                    raise NotOutputControllableError(
                        f"agent {i + 1} not output controllable on "
                        f"[{self.t0:g}, {self.T:g}]")
                checked.add(id(s))

    @property
    def N(self) -> int:
        return self.a.size

    @property
    def sys(self) -> LtiSystem:
        if not self.homogeneous:
            raise ValueError("problem is heterogeneous; use .systems")
        return self.systems[0]

    def initial_state(self, i: int) -> np.ndarray:
        return self.x0[self.layout.state_slice(i)]

    def require_horizon(self) -> float:
        if self.T is None:
            raise ValueError("this operation needs a finite horizon T")
        return self.T


def default_eps_switch(prob: FiniteTimeProblem) -> float:
    """Width of the terminal window where feedback switches to open loop."""
    return 1e-3 * (prob.require_horizon() - prob.t0)


def _require_homogeneous(prob, what):
    if not prob.homogeneous:
        raise ValueError(f"{what} applies to homogeneous problems only")


def _check_time(prob, t, upper):
    if t < prob.t0 - 1e-12 or t > upper + 1e-12:
        raise ValueError(f"t = {t} outside the validity interval")


def open_loop_control(prob: FiniteTimeProblem, t: float) -> np.ndarray:
    """Optimal open-loop control at time t, synthesized from (t0, x0).

    Finite on the closed interval including t = T, where it equals the
    limit of the feedback law along the optimal trajectory.
    """
    _require_homogeneous(prob, "open_loop_control")
    T = prob.require_horizon()
    _check_time(prob, t, T)
    law = OpenLoopLaw(prob.sys, prob.a, prob.t0, prob.x0, T)
    return law.control(t, None, None)


def state_feedback_gain(prob: FiniteTimeProblem, t: float,
                        eps_switch: float | None = None) -> np.ndarray:
    """Feedback gain K(t) with u = -K(t) x.

    K(t) = L(a) (x) (B^T e^(A^T(T-t)) C^T W(t,T)^(-1) C e^(A(T-t))). Valid
    for t up to T - eps_switch; past that the horizon Gramian is
    near-singular and callers must use the switch protocol of
    make_control_law.
    """
    _require_homogeneous(prob, "state_feedback_gain")
    T = prob.require_horizon()
    if eps_switch is None:
        eps_switch = default_eps_switch(prob)
    _check_time(prob, t, T)
    if t > T - eps_switch:
        raise NearSingularHorizonError(
            f"t = {t} is inside the switch window (T - {eps_switch:g}); "
            "use the open-loop continuation")
    sys = prob.sys
    phi, wx = expm_with_gramian(sys.A, sys.B, T - t)
    w = sys.C @ wx @ sys.C.T
    try:
        block = sys.B.T @ phi.T @ sys.C.T @ np.linalg.solve(w, sys.C @ phi)
    except np.linalg.LinAlgError as exc:
        raise NotOutputControllableError("W(t, T) is singular") from exc
    return kron(consensus_weight_matrix(prob.a), block)


def output_feedback_gain(prob: FiniteTimeProblem, t: float,
                         eps_switch: float | None = None) -> np.ndarray:
    """Feedback gain K_y(t) with u = -K_y(t) y, requiring ker(C) A-invariant.

    K_y(t) = L(a) (x) (B^T C^T G(t,T)^(-1)); along trajectories it produces
    the same control signals as the state-feedback gain.
    """
    _require_homogeneous(prob, "output_feedback_gain")
    T = prob.require_horizon()
    if eps_switch is None:
        eps_switch = default_eps_switch(prob)
    _check_time(prob, t, T)
    sys = prob.sys
    if not is_kernel_A_invariant(sys):
        raise KernelNotInvariantError(
            "output feedback needs ker(C) A-invariant")
    if t > T - eps_switch:
        raise NearSingularHorizonError(
            f"t = {t} is inside the switch window (T - {eps_switch:g}); "
            "use the open-loop continuation")
    _, gx = expm_with_gramian(-sys.A, sys.B, T - t)
    g = sys.C @ gx @ sys.C.T
    try:
        block = np.linalg.solve(g, sys.C @ sys.B).T
    except np.linalg.LinAlgError as exc:
        raise NotOutputControllableError("G(t, T) is singular") from exc
    return kron(consensus_weight_matrix(prob.a), block)


def predict_consensus_point(prob: FiniteTimeProblem, tol: float = 1e-9) -> np.ndarray:
    """Rendezvous output for initial states inside ker(A).

    When every x_i(t0) lies in the kernel of A the optimal laws meet at the
    weighted output average y_c = (sum a_i)^(-1) sum a_i C x_i(t0).
    """
    _require_homogeneous(prob, "predict_consensus_point")
    sys = prob.sys
    a_norm = max(np.linalg.norm(sys.A), 1e-300)
    for i in range(prob.N):
        xi = prob.initial_state(i)
        drift = np.linalg.norm(sys.A @ xi)
        if drift > tol * a_norm * max(np.linalg.norm(xi), 1.0):
            raise InitialStateNotInKernelError(
                f"agent {i + 1} initial state is not in ker(A) "
                f"(||A x|| = {drift:.2e})")
    outputs = np.array([sys.C @ prob.initial_state(i) for i in range(prob.N)])
    return alpha(prob.a) * (prob.a @ outputs)


def _heterogeneous_synthesis(prob: FiniteTimeProblem):
    """Per-agent Gramians, drift outputs, rendezvous target and coefficients."""
    T = prob.require_horizon()
    p = prob.layout.p
    weighted_sum = np.zeros((p, p))
    weighted_targets = np.zeros(p)
    w_list, b_list = [], []
    for i, sys_i in enumerate(prob.systems):
        w = output_gramian(sys_i, prob.t0, T).value
        eigs = np.linalg.eigvalsh(w)
        if eigs[-1] <= 0.0 or eigs[0] <= 1e-12 * eigs[-1]:
            raise NotOutputControllableError(
                f"agent {i + 1} not output controllable on [{prob.t0:g}, {T:g}]")
        b = sys_i.C @ mat_exp(sys_i.A, T - prob.t0) @ prob.initial_state(i)
        winv = np.linalg.inv(w)
        weighted_sum += prob.a[i] * winv
        weighted_targets += prob.a[i] * (winv @ b)
        w_list.append(w)
        b_list.append(b)
    alpha_star = np.linalg.solve(weighted_sum, weighted_targets)
    coefficients = [np.linalg.solve(w, alpha_star - b)
                    for w, b in zip(w_list, b_list)]
    return alpha_star, w_list, b_list, coefficients


def heterogeneous_controller(prob: FiniteTimeProblem):
    """Rendezvous target and per-agent open-loop laws for mixed plants.

    The optimal common output is
        alpha_star = (sum_j a_j W_j^(-1))^(-1) sum_i a_i W_i^(-1) C_i e^(A_i(T-t0)) x_i(t0)
    with per-agent Gramians W_i = W_i(t0, T); agent i then applies the
    minimum-energy steer of its output onto alpha_star. Returns
    (alpha_star, per_agent_laws) where each law is a callable u_i(t).
    """
    T = prob.require_horizon()
    alpha_star, _, _, coefficients = _heterogeneous_synthesis(prob)

    def make_agent_law(sys_i, z):
        def agent_control(t):
            return sys_i.B.T @ mat_exp(sys_i.A.T, T - t) @ sys_i.C.T @ z
        return agent_control

    per_agent = [make_agent_law(s, z) for s, z in zip(prob.systems, coefficients)]
    return alpha_star, per_agent


def optimal_cost(prob: FiniteTimeProblem) -> float:
    """Closed-form minimum of the weighted control energy.

    Homogeneous: c^T (V2(a) (x) W(t0,T))^(-1) c with
    c = (V3 (x) C e^(A(T-t0))) x0. Heterogeneous: the stationary value
    sum_i a_i (alpha_star - b_i)^T W_i^(-1) (alpha_star - b_i).
    """
    T = prob.require_horizon()
    if prob.homogeneous:
        sys = prob.sys
        _, v2, v3 = factor_matrices(prob.a)
        w = output_gramian(sys, prob.t0, T).value
        theta = sys.C @ mat_exp(sys.A, T - prob.t0)
        c = kron(v3, theta) @ prob.x0
        q = kron(v2, w)
        return float(c @ np.linalg.solve(q, c))
    _, w_list, b_list, coefficients = _heterogeneous_synthesis(prob)
    total = 0.0
    for ai, w, z in zip(prob.a, w_list, coefficients):
        total += ai * float(z @ w @ z)
    return total


def make_control_law(prob: FiniteTimeProblem, kind: LawKind,
                     eps_switch: float | None = None) -> ControlLaw:
    """Build an evaluable controller of the requested kind for the problem.

    Finite-time feedback kinds follow the switch protocol: feedback until
    t_s = T - eps_switch, then the open-loop continuation captured from the
    switch state, which preserves optimality while avoiding the
    near-singular horizon Gramian. Asymptotic kinds solve the Riccati and
    observer equations as needed.
    """
    if isinstance(kind, str):
        kind = LawKind(kind)

    if kind is LawKind.HETEROGENEOUS_FT:
        T = prob.require_horizon()
        alpha_star, _, _, coefficients = _heterogeneous_synthesis(prob)
        return HeterogeneousLaw(prob.systems, alpha_star, coefficients, T)

    if kind is LawKind.OPEN_LOOP_FT:
        _require_homogeneous(prob, "open-loop law")
        return OpenLoopLaw(prob.sys, prob.a, prob.t0, prob.x0, prob.require_horizon())

    if kind in (LawKind.STATE_FEEDBACK_FT, LawKind.OUTPUT_FEEDBACK_FT):
        _require_homogeneous(prob, "feedback law")
        T = prob.require_horizon()
        if eps_switch is None:
            eps_switch = default_eps_switch(prob)
        if not 0.0 < eps_switch < (T - prob.t0):
            raise ValueError("eps_switch must lie in (0, T - t0)")
        output_mode = kind is LawKind.OUTPUT_FEEDBACK_FT
        if output_mode and not is_kernel_A_invariant(prob.sys):
            raise KernelNotInvariantError(
                "output feedback needs ker(C) A-invariant")
        return SwitchedFeedbackLaw(prob.sys, prob.a, prob.t0, T,
                                   T - eps_switch, output_mode)

    _require_homogeneous(prob, "asymptotic law")
    sys = prob.sys
    if kind is LawKind.ASYMPTOTIC_STATE:
        sol = asymptotic.solve_are(sys.A, sys.B)
        return ConstantGainLaw(asymptotic.asymptotic_state_gain(prob.a, sol),
                               uses_output=False, kind=kind)
    if kind is LawKind.ASYMPTOTIC_OUTPUT:
        sol = asymptotic.solve_are(sys.A, sys.B)
        return ConstantGainLaw(asymptotic.asymptotic_output_gain(prob.a, sys, sol),
                               uses_output=True, kind=kind)
    if kind is LawKind.OBSERVER_BASED:
        sol = asymptotic.solve_are(sys.A, sys.B)
        obs = asymptotic.solve_observer_are(sys.A, sys.C)
        return asymptotic.observer_consensus_law(prob.a, sys, sol, obs)

    raise ValueError(f"unsupported law kind {kind}")
