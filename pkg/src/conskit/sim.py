"""Closed-loop integration, cost bookkeeping and topology comparisons.

The simulator integrates the stacked multi-agent dynamics under any
ControlLaw with fixed-step RK4 (default, deterministic) or adaptive RK45
sampled on the same grid. Finite-time laws get a grid point exactly at the
switch time and at T; observer-based laws are integrated jointly with
their observer states. The weighted control energy is accumulated with
the trapezoidal rule on the integration grid.
"""

from __future__ import annotations

import csv
import warnings
from dataclasses import dataclass, field

import numpy as np
import scipy.integrate

from .errors import DisconnectedGraphWarning, NonFiniteStateError
from .finite_time import FiniteTimeProblem
from .laws import AgentLayout, ControlLaw, TopologyLaw
from .weights import check_weights

__all__ = [
    "Trajectory",
    "TopologyGraph",
    "simulate",
    "accumulate_cost",
    "consensus_error",
    "graph_laplacian",
    "topology_restricted_controller",
    "tune_restricted_gain",
    "write_trajectory_csv",
]


@dataclass(frozen=True)
class Trajectory:
    """Time-gridded record of one closed-loop run.

    outputs[k] is exactly (blockdiag C_i) @ states[k]; cost_integral is the
    cumulative weighted control energy on the same grid.
    """

    times: np.ndarray
    states: np.ndarray
    outputs: np.ndarray
    controls: np.ndarray
    cost_integral: np.ndarray
    layout: AgentLayout = field(repr=False)
    observer_states: np.ndarray | None = None

    def __post_init__(self):
        if np.any(np.diff(self.times) <= 0.0):
            raise ValueError("times must be strictly increasing")
        if np.any(np.diff(self.cost_integral) < -1e-12):
            raise ValueError("cost integral must be nondecreasing")

    def index_at(self, t: float) -> int:
        return int(np.argmin(np.abs(self.times - t)))


@dataclass(frozen=True)
class TopologyGraph:
    """Undirected weighted communication graph on agents 0..N-1."""

    N: int
    edges: tuple
    edge_weights: tuple = ()

    def __post_init__(self):
        edges = tuple((int(i), int(j)) for i, j in self.edges)
        weights = tuple(float(w) for w in self.edge_weights)
        if not weights:
            weights = tuple(1.0 for _ in edges)
        if len(weights) != len(edges):
            raise ValueError("need one weight per edge")
        for (i, j) in edges:
            if i == j:
                raise ValueError(f"self-loop on agent {i}")
            if not (0 <= i < self.N and 0 <= j < self.N):
                raise ValueError(f"edge ({i}, {j}) out of range for N = {self.N}")
        if any(w <= 0.0 for w in weights):
            raise ValueError("edge weights must be positive")
        object.__setattr__(self, "edges", edges)
        object.__setattr__(self, "edge_weights", weights)

    def is_connected(self) -> bool:
        if self.N <= 1:
            return True
        adj = [[] for _ in range(self.N)]
        for (i, j) in self.edges:
            adj[i].append(j)
            adj[j].append(i)
        seen = {0}
        stack = [0]
        while stack:
            k = stack.pop()
            for nb in adj[k]:
                if nb not in seen:
                    seen.add(nb)
                    stack.append(nb)
        return len(seen) == self.N


def graph_laplacian(graph: TopologyGraph) -> np.ndarray:
    lap = np.zeros((graph.N, graph.N))
    for (i, j), w in zip(graph.edges, graph.edge_weights):
        lap[i, i] += w
        lap[j, j] += w
        lap[i, j] -= w
        lap[j, i] -= w
    return lap


def topology_restricted_controller(graph: TopologyGraph, base_gain,
                                   freeze_time: float | None = None) -> TopologyLaw:
    """Comparison law u = -(Lap(graph) (x) base_gain(t)) y.

    Restricted topologies are generically suboptimal; this law exists to
    measure that gap. A disconnected graph is still constructible (for
    completeness of the comparison) but emits DisconnectedGraphWarning.
    """
    if not graph.is_connected():
        warnings.warn("topology graph is disconnected; consensus may be "
                      "unreachable", DisconnectedGraphWarning, stacklevel=2)
    return TopologyLaw(graph_laplacian(graph), base_gain, freeze_time)


def _build_grid(t_start, t_stop, step):
    n_steps = max(1, int(np.ceil((t_stop - t_start) / step - 1e-12)))
    return np.linspace(t_start, t_stop, n_steps + 1)


def _segment_grids(t0, t_final, step, switch_time):
    """Grids that hit the switch time and t_final exactly.

    The feedback gain grows like 1/(T - t) towards the switch, so the last
    stretch before it is refined to keep h * gain small regardless of the
    requested step; away from the switch the grid stays uniform.
    """
    if switch_time is None or not t0 < switch_time < t_final:
        return [_build_grid(t0, t_final, step)]
    eps = t_final - switch_time
    fine_step = min(step, eps / 20.0)
    window = min(10.0 * eps, switch_time - t0)
    fine = _build_grid(switch_time - window, switch_time, fine_step)
    if switch_time - window > t0 + 1e-15 * max(abs(t0), 1.0):
        coarse = _build_grid(t0, switch_time - window, step)
        first = np.concatenate([coarse[:-1], fine])
    else:
        first = fine
    tail = _build_grid(switch_time, t_final, fine_step)
    return [first, tail]


def _check_finite(z, t):
    if not np.all(np.isfinite(z)):
        raise NonFiniteStateError(f"state became non-finite at t = {t:.6g}")


def _rk4_segment(rhs, grid, z0):
    out = np.empty((grid.size, z0.size))
    out[0] = z0
    z = z0
    for k in range(grid.size - 1):
        t, h = grid[k], grid[k + 1] - grid[k]
        k1 = rhs(t, z)
        k2 = rhs(t + 0.5 * h, z + 0.5 * h * k1)
        k3 = rhs(t + 0.5 * h, z + 0.5 * h * k2)
        k4 = rhs(t + h, z + h * k3)
        z = z + (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
        _check_finite(z, grid[k + 1])
        out[k + 1] = z
    return out


def _rk45_segment(rhs, grid, z0):
    sol = scipy.integrate.solve_ivp(rhs, (grid[0], grid[-1]), z0, method="RK45",
                                    t_eval=grid, rtol=1e-10, atol=1e-12)
    if not sol.success:
        raise NonFiniteStateError(f"adaptive integration failed: {sol.message}")
    values = sol.y.T
    _check_finite(values, grid[-1])
    return values


def simulate(prob: FiniteTimeProblem, law: ControlLaw, step: float | None = None,
             method: str = "rk4", t_end: float | None = None,
             grid: np.ndarray | None = None) -> Trajectory:
    """Integrate the multi-agent closed loop under the given law.

    Finite-time laws run on [t0, T] with grid points exactly at the switch
    time and at T; laws without a horizon (asymptotic, observer, topology
    on an open-ended problem) need an explicit t_end. The default step is
    (horizon)/2000. An explicit grid (strictly increasing, starting at t0)
    overrides step-based grid construction, which makes runs of different
    laws directly comparable sample by sample.
    """
    layout = prob.layout
    if grid is not None:
        grid = np.asarray(grid, dtype=float)
        if grid.ndim != 1 or grid.size < 2 or np.any(np.diff(grid) <= 0.0):
            raise ValueError("grid must be strictly increasing with >= 2 points")
        if abs(grid[0] - prob.t0) > 1e-12:
            raise ValueError("grid must start at t0")
        t_final = float(grid[-1])
    else:
        t_final = prob.T if prob.T is not None else t_end
    if t_final is None:
        raise ValueError("asymptotic runs need an explicit t_end")
    if t_final <= prob.t0:
        raise ValueError("t_end must exceed t0")
    if step is None:
        step = (t_final - prob.t0) / 2000.0
    if not step > 0.0:
        raise ValueError("step must be positive")
    method = method.lower()
    if method not in ("rk4", "rk45"):
        raise ValueError(f"unknown method {method!r} (use 'rk4' or 'rk45')")
    integrate_segment = _rk4_segment if method == "rk4" else _rk45_segment

    big_a = layout.big_A()
    big_b = layout.big_B()
    big_c = layout.big_C()
    nx = layout.total_states
    a = prob.a
    inv_total = 1.0 / float(np.sum(a))
    has_observer = law.observer_dim > 0

    def residuals(y):
        per_agent = y.reshape(layout.N, layout.p)
        center = inv_total * (a @ per_agent)
        return (per_agent - center).ravel()

    def control_at(t, x, xhat):
        if has_observer:
            return law.observer_control(t, xhat)
        return law.control(t, x, big_c @ x)

    def rhs(t, z):
        x = z[:nx]
        xhat = z[nx:] if has_observer else None
        u = control_at(t, x, xhat)
        dx = big_a @ x + big_b @ u
        if not has_observer:
            return dx
        rho = residuals(big_c @ x)
        return np.concatenate([dx, law.observer_rhs(t, rho, xhat)])

    z0 = prob.x0
    if has_observer:
        z0 = np.concatenate([z0, law.initial_observer_state()])

    if grid is not None:
        grids = [grid]
        if law.switch_time is not None and prob.t0 < law.switch_time < t_final:
            hits = np.nonzero(np.abs(grid - law.switch_time) <= 1e-12)[0]
            if hits.size == 0:
                raise ValueError("explicit grid must contain the switch time")
            cut = int(hits[0])
            grids = [grid[:cut + 1], grid[cut:]]
    else:
        grids = _segment_grids(prob.t0, t_final, step, law.switch_time)
    times = [grids[0]]
    chunks = [integrate_segment(rhs, grids[0], z0)]
    if len(grids) > 1:
        boundary_state = chunks[0][-1]
        if hasattr(law, "begin_tail"):
            law.begin_tail(grids[0][-1], boundary_state[:nx])
        chunk = integrate_segment(rhs, grids[1], boundary_state)
        times.append(grids[1][1:])
        chunks.append(chunk[1:])
    times = np.concatenate(times)
    z_samples = np.vstack(chunks)

    states = z_samples[:, :nx]
    observer_states = z_samples[:, nx:] if has_observer else None
    outputs = states @ big_c.T
    controls = np.empty((times.size, layout.total_inputs))
    for k, t in enumerate(times):
        xhat_k = observer_states[k] if has_observer else None
        controls[k] = control_at(t, states[k], xhat_k)

    weight_vec = layout.input_weight_vector(a)
    rate = (controls * controls) @ weight_vec
    increments = 0.5 * np.diff(times) * (rate[:-1] + rate[1:])
    cost = np.concatenate([[0.0], np.cumsum(increments)])

    return Trajectory(times=times, states=states, outputs=outputs,
                      controls=controls, cost_integral=cost, layout=layout,
                      observer_states=observer_states)


def accumulate_cost(traj: Trajectory, a) -> float:
    """Trapezoidal weighted control energy sum_i a_i int u_i^T u_i dt."""
    weight_vec = traj.layout.input_weight_vector(check_weights(a))
    rate = (traj.controls * traj.controls) @ weight_vec
    return float(np.trapezoid(rate, traj.times))


def consensus_error(traj: Trajectory, t: float) -> float:
    """Max pairwise output distance at the grid sample nearest to t."""
    k = traj.index_at(t)
    per_agent = traj.outputs[k].reshape(traj.layout.N, traj.layout.p)
    worst = 0.0
    for i in range(traj.layout.N):
        diffs = per_agent[i + 1:] - per_agent[i]
        if diffs.size:
            worst = max(worst, float(np.max(np.linalg.norm(diffs, axis=1))))
    return worst


def tune_restricted_gain(prob: FiniteTimeProblem, graph: TopologyGraph,
                         base_direction, target_error: float,
                         step: float | None = None, method: str = "rk4",
                         t_end: float | None = None):
    """Smallest constant gain scale for which the restricted law rendezvous.

    Gives the restricted topology its best shot before a cost comparison:
    the law u = -(Lap (x) scale * base_direction) y is simulated while the
    scale is bisected down to the smallest value whose terminal consensus
    error still meets target_error. Returns (scale, trajectory).
    """
    def attempt(scale):
        law = topology_restricted_controller(graph, lambda t: scale * base_direction)
        traj = simulate(prob, law, step=step, method=method, t_end=t_end)
        return traj, consensus_error(traj, traj.times[-1])

    lo, hi = 0.0, 1.0
    traj_hi, err = attempt(hi)
    doublings = 0
    while err > target_error and doublings < 60:
        hi *= 2.0
        traj_hi, err = attempt(hi)
        doublings += 1
    if err > target_error:
        raise ValueError("restricted topology cannot reach the consensus "
                         "tolerance with any tested gain")
    for _ in range(40):
        mid = 0.5 * (lo + hi)
        traj_mid, err_mid = attempt(mid)
        if err_mid <= target_error:
            hi, traj_hi = mid, traj_mid
        else:
            lo = mid
    return hi, traj_hi


def write_trajectory_csv(traj: Trajectory, path) -> None:
    """One row per (sample, agent), 12 significant digits.

    Columns are sized by the largest agent dimensions; agents with fewer
    states or inputs leave the extra cells empty.
    """
    layout = traj.layout
    n_max = max(layout.state_dims)
    m_max = max(layout.input_dims)
    header = (["t", "agent"]
              + [f"state_{i + 1}" for i in range(n_max)]
              + [f"output_{i + 1}" for i in range(layout.p)]
              + [f"control_{i + 1}" for i in range(m_max)]
              + ["cost_cum"])

    def fmt(v):
        return format(v, ".12g")

    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(header)
        for k, t in enumerate(traj.times):
            for i in range(layout.N):
                xs = traj.states[k, layout.state_slice(i)]
                ys = traj.outputs[k, layout.output_slice(i)]
                us = traj.controls[k, layout.input_slice(i)]
                row = [fmt(t), str(i + 1)]
                row += [fmt(v) for v in xs] + [""] * (n_max - xs.size)
                row += [fmt(v) for v in ys]
                row += [fmt(v) for v in us] + [""] * (m_max - us.size)
                row.append(fmt(traj.cost_integral[k]))
                writer.writerow(row)
