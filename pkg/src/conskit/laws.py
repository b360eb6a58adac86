"""Evaluable controller objects produced by the synthesis routines.

A ControlLaw maps (t, stacked state, stacked output) to the stacked control
vector. Finite-time feedback laws carry the switch protocol: close to the
terminal time the horizon Gramian becomes near-singular, so at the switch
time the law freezes into the minimum-energy open-loop continuation
computed from the captured state. By the dynamic programming principle
this continuation coincides with the optimal control, so the switch does
not change the realized trajectory or cost.
"""

from __future__ import annotations

import threading
from enum import Enum

import numpy as np
import scipy.linalg

from .errors import NotOutputControllableError
from .gramian import LtiSystem, expm_with_gramian, output_gramian
from .linalg import mat_exp
from .weights import check_weights, consensus_weight_matrix

__all__ = [
    "LawKind",
    "AgentLayout",
    "ControlLaw",
    "OpenLoopLaw",
    "SwitchedFeedbackLaw",
    "HeterogeneousLaw",
    "ConstantGainLaw",
    "ObserverLaw",
    "TopologyLaw",
]


class LawKind(Enum):
    OPEN_LOOP_FT = "OpenLoopFT"
    STATE_FEEDBACK_FT = "StateFeedbackFT"
    OUTPUT_FEEDBACK_FT = "OutputFeedbackFT"
    HETEROGENEOUS_FT = "HeterogeneousFT"
    ASYMPTOTIC_STATE = "AsymptoticState"
    ASYMPTOTIC_OUTPUT = "AsymptoticOutput"
    OBSERVER_BASED = "ObserverBased"
    TOPOLOGY_RESTRICTED = "TopologyRestricted"


class AgentLayout:
    """Index bookkeeping for stacked multi-agent vectors."""

    def __init__(self, systems):
        systems = tuple(systems)
        if not systems:
            raise ValueError("need at least one system")
        p = systems[0].p
        if any(s.p != p for s in systems):
            raise ValueError("all agents must share the output dimension")
        self.systems = systems
        self.N = len(systems)
        self.p = p
        self.state_dims = tuple(s.n for s in systems)
        self.input_dims = tuple(s.m for s in systems)
        self._xoff = np.concatenate([[0], np.cumsum(self.state_dims)])
        self._uoff = np.concatenate([[0], np.cumsum(self.input_dims)])

    @property
    def total_states(self) -> int:
        return int(self._xoff[-1])

    @property
    def total_inputs(self) -> int:
        return int(self._uoff[-1])

    @property
    def total_outputs(self) -> int:
        return self.N * self.p

    def state_slice(self, i: int) -> slice:
        return slice(int(self._xoff[i]), int(self._xoff[i + 1]))

    def input_slice(self, i: int) -> slice:
        return slice(int(self._uoff[i]), int(self._uoff[i + 1]))

    def output_slice(self, i: int) -> slice:
        return slice(i * self.p, (i + 1) * self.p)

    def big_A(self) -> np.ndarray:
        return scipy.linalg.block_diag(*(s.A for s in self.systems))

    def big_B(self) -> np.ndarray:
        return scipy.linalg.block_diag(*(s.B for s in self.systems))

    def big_C(self) -> np.ndarray:
        return scipy.linalg.block_diag(*(s.C for s in self.systems))

    def input_weight_vector(self, a) -> np.ndarray:
        a = check_weights(a)
        if a.size != self.N:
            raise ValueError("weight vector length does not match agent count")
        return np.concatenate([np.full(m, ai) for ai, m in zip(a, self.input_dims)])


class ControlLaw:
    """Base class: static laws implement control(t, x, y)."""

    kind: LawKind
    switch_time: float | None = None
    terminal_time: float | None = None
    observer_dim: int = 0

    def control(self, t: float, x: np.ndarray, y: np.ndarray) -> np.ndarray:
        raise NotImplementedError

    def __repr__(self):
        return f"<{type(self).__name__} kind={self.kind.value}>"


def _solve_gramian(w, rhs, context: str):
    try:
        return np.linalg.solve(w, rhs)
    except np.linalg.LinAlgError as exc:
        raise NotOutputControllableError(f"{context}: gramian is singular") from exc


class OpenLoopLaw(ControlLaw):
    """Minimum-energy open-loop consensus control anchored at (t_ref, x_ref).

    u(t) = -L(a) (x) B^T e^(A^T(T-t)) C^T W(t_ref,T)^(-1) C e^(A(T-t_ref)) x_ref.
    Stays finite on the whole closed interval up to and including T.
    """

    kind = LawKind.OPEN_LOOP_FT

    def __init__(self, sys: LtiSystem, a, t_ref: float, x_ref, T: float):
        a = check_weights(a)
        x_ref = np.asarray(x_ref, dtype=float).ravel()
        if x_ref.size != a.size * sys.n:
            raise ValueError("x_ref length must be N * n")
        self.sys = sys
        self.a = a
        self.t_ref = float(t_ref)
        self.terminal_time = float(T)
        w = output_gramian(sys, t_ref, T).value
        theta = sys.C @ mat_exp(sys.A, T - t_ref)
        targets = x_ref.reshape(a.size, sys.n) @ theta.T
        eta = _solve_gramian(w, targets.T, "open-loop synthesis").T
        self._coupled = consensus_weight_matrix(a) @ eta
        self._memo = {}

    def control(self, t, x, y):
        u = self._memo.get(t)
        if u is None:
            m1 = self.sys.B.T @ mat_exp(self.sys.A.T, self.terminal_time - t) @ self.sys.C.T
            u = -(self._coupled @ m1.T).ravel()
            self._memo[t] = u
        return u


class SwitchedFeedbackLaw(ControlLaw):
    """Finite-time feedback law with the open-loop switch protocol.

    In state mode the per-agent gain is
        F(t) = B^T e^(A^T(T-t)) C^T W(t,T)^(-1) C e^(A(T-t))
    and in output mode
        F(t) = B^T C^T G(t,T)^(-1)
    applied through u = -(L(a) (x) F(t)) z with z the stacked state
    respectively output. For t at or beyond the switch time the law
    evaluates the open-loop continuation captured from the switch state.
    """

    def __init__(self, sys: LtiSystem, a, t0: float, T: float,
                 switch_time: float, output_mode: bool):
        self.sys = sys
        self.a = check_weights(a)
        self.t0 = float(t0)
        self.terminal_time = float(T)
        self.switch_time = float(switch_time)
        if not t0 < switch_time <= T:
            raise ValueError("switch time must lie inside (t0, T]")
        self.output_mode = bool(output_mode)
        self.kind = LawKind.OUTPUT_FEEDBACK_FT if output_mode else LawKind.STATE_FEEDBACK_FT
        self._weight = consensus_weight_matrix(self.a)
        self._tail: OpenLoopLaw | None = None
        self._lock = threading.Lock()
        self._memo = {}
        self._fuzz = 1e-12 * (T - t0)

    def gain_block(self, t: float) -> np.ndarray:
        """Per-agent gain F(t); memoized because integrators revisit stage times."""
        f = self._memo.get(t)
        if f is not None:
            return f
        sys = self.sys
        delta = self.terminal_time - t
        if self.output_mode:
            _, gx = expm_with_gramian(-sys.A, sys.B, delta)
            g = sys.C @ gx @ sys.C.T
            f = _solve_gramian(g, sys.C @ sys.B, "output-feedback gain").T
        else:
            phi, wx = expm_with_gramian(sys.A, sys.B, delta)
            w = sys.C @ wx @ sys.C.T
            f = sys.B.T @ phi.T @ sys.C.T @ _solve_gramian(w, sys.C @ phi, "state-feedback gain")
        self._memo[t] = f
        return f

    def begin_tail(self, t_anchor: float, x_anchor) -> None:
        """Freeze the remaining control to the open-loop law from (t_anchor, x_anchor).

        The simulation driver calls this exactly at the switch time with the
        integrated state; stray concurrent callers see a consistent one-time
        capture.
        """
        with self._lock:
            if self._tail is None:
                self._tail = OpenLoopLaw(self.sys, self.a, t_anchor,
                                         np.array(x_anchor, dtype=float),
                                         self.terminal_time)

    def control(self, t, x, y):
        if self._tail is not None and t >= self.switch_time - self._fuzz:
            return self._tail.control(t, x, y)
        if t <= self.switch_time + self._fuzz:
            f = self.gain_block(t)
            z = y if self.output_mode else x
            cols = f.shape[1]
            return -(self._weight @ z.reshape(self.a.size, cols) @ f.T).ravel()
        # Evaluation past the switch time without a driver: capture here.
        self.begin_tail(t, x)
        return self._tail.control(t, x, y)


class HeterogeneousLaw(ControlLaw):
    """Per-agent minimum-energy steering of every output to a common target.

    Each agent runs u_i(t) = B_i^T e^(A_i^T(T-t)) C_i^T z_i with
    z_i = W_i(t0,T)^(-1) (alpha_star - C_i e^(A_i(T-t0)) x_i(t0)).
    """

    kind = LawKind.HETEROGENEOUS_FT

    def __init__(self, systems, alpha_star, coefficients, T: float):
        self.systems = tuple(systems)
        self.alpha_star = np.asarray(alpha_star, dtype=float).ravel()
        self.coefficients = [np.asarray(z, dtype=float).ravel() for z in coefficients]
        if len(self.coefficients) != len(self.systems):
            raise ValueError("need one coefficient vector per agent")
        self.terminal_time = float(T)
        self._memo = {}

    def control(self, t, x, y):
        u = self._memo.get(t)
        if u is None:
            parts = []
            for sys_i, z in zip(self.systems, self.coefficients):
                m1 = sys_i.B.T @ mat_exp(sys_i.A.T, self.terminal_time - t) @ sys_i.C.T
                parts.append(m1 @ z)
            u = np.concatenate(parts)
            self._memo[t] = u
        return u


class ConstantGainLaw(ControlLaw):
    """Static law u = -K x (state) or u = -K y (output)."""

    def __init__(self, gain, uses_output: bool, kind: LawKind):
        self.gain = np.asarray(gain, dtype=float)
        self.uses_output = bool(uses_output)
        self.kind = kind

    def control(self, t, x, y):
        return -(self.gain @ (y if self.uses_output else x))


class ObserverLaw(ControlLaw):
    """Dynamic output law with a per-agent deviation observer.

    Agent i runs u_i = -B^T P0 d_i on its observer state d_i, driven by the
    weighted relative-output residual r_i = y_i - (sum_j a_j y_j) / sum(a):

        d_i' = (A - B B^T P0) d_i - Q C^T (r_i - C d_i)

    Observer states start at zero; convergence is independent of that
    choice.
    """

    kind = LawKind.OBSERVER_BASED

    def __init__(self, sys: LtiSystem, a, P0, Q):
        self.sys = sys
        self.a = check_weights(a)
        self.P0 = np.asarray(P0, dtype=float)
        self.Q = np.asarray(Q, dtype=float)
        self.N = self.a.size
        self.observer_dim = self.N * sys.n
        self._control_gain = sys.B.T @ self.P0
        self._drift = (sys.A - sys.B @ self._control_gain
                       + self.Q @ sys.C.T @ sys.C)
        self._injection = self.Q @ sys.C.T

    def initial_observer_state(self) -> np.ndarray:
        return np.zeros(self.observer_dim)

    def observer_control(self, t, xhat) -> np.ndarray:
        est = xhat.reshape(self.N, self.sys.n)
        return -(est @ self._control_gain.T).ravel()

    def observer_rhs(self, t, residual, xhat) -> np.ndarray:
        est = xhat.reshape(self.N, self.sys.n)
        res = residual.reshape(self.N, self.sys.p)
        return (est @ self._drift.T - res @ self._injection.T).ravel()

    def control(self, t, x, y):
        raise TypeError(
            "observer-based law carries internal state; run it through "
            "simulate(), which integrates the observer alongside the plant"
        )


class TopologyLaw(ControlLaw):
    """Output feedback through a fixed communication-graph Laplacian.

    u = -(Lap (x) F(t)) y. Used for cost comparison against the optimal
    complete-topology law; carries no optimality claim. An optional freeze
    time clamps the gain argument, which keeps time-varying gains finite
    through the terminal time.
    """

    kind = LawKind.TOPOLOGY_RESTRICTED

    def __init__(self, laplacian, base_gain, freeze_time: float | None = None):
        self.laplacian = np.asarray(laplacian, dtype=float)
        self.base_gain = base_gain
        self.freeze_time = freeze_time

    def control(self, t, x, y):
        arg = t if self.freeze_time is None else min(t, self.freeze_time)
        f = np.atleast_2d(np.asarray(self.base_gain(arg), dtype=float))
        n_agents = self.laplacian.shape[0]
        outputs = y.reshape(n_agents, f.shape[1])
        return -(self.laplacian @ outputs @ f.T).ravel()
