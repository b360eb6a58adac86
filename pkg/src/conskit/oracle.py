"""Brute-force optimality certification via a discretized minimum-norm solve.

Independently of the closed-form controllers, the rendezvous problem is
restricted to piecewise-constant controls on a K-cell grid. The equality
constraints (all outputs meet agent 1's output at T) become midpoint-rule
linear constraints, and the weighted minimum-norm solution follows from
the normal equations of the projection onto the constraint set: the
optimum lies in the row space of the weighted constraint map, and its
cost solves a small symmetric positive definite system. Refining K drives
the discrete cost to the continuous optimum, which certifies (or refutes)
a law's optimality.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.linalg

from .errors import RankDeficientConstraintsError
from .finite_time import FiniteTimeProblem
from .laws import ControlLaw
from .linalg import mat_exp
from .sim import simulate

__all__ = [
    "DiscretizedProblem",
    "discretize",
    "solve_min_norm",
    "certify",
    "CertificationReport",
]


@dataclass(frozen=True)
class DiscretizedProblem:
    """Finite-dimensional restriction of the rendezvous problem.

    sensitivity_blocks[i][k] = C_i e^(A_i (T - s_k)) B_i at the midpoint
    s_k of grid cell k; constraint_rhs stacks the required output
    corrections of agents 2..N relative to agent 1.
    """

    grid: np.ndarray
    sensitivity_blocks: tuple
    weights: np.ndarray
    constraint_rhs: np.ndarray
    terminal_outputs: tuple

    @property
    def K(self) -> int:
        return self.grid.size - 1

    @property
    def cell_width(self) -> float:
        return float(self.grid[1] - self.grid[0])

    @property
    def n_agents(self) -> int:
        return self.weights.size

    @property
    def p(self) -> int:
        return self.sensitivity_blocks[0].shape[1]

    def constraint_matrix(self) -> np.ndarray:
        """Dense constraint map E with E u = constraint_rhs (test helper)."""
        h = self.cell_width
        input_dims = [b.shape[2] for b in self.sensitivity_blocks]
        offsets = np.concatenate([[0], np.cumsum([m * self.K for m in input_dims])])
        rows = (self.n_agents - 1) * self.p
        e = np.zeros((rows, offsets[-1]))
        for j in range(1, self.n_agents):
            rslice = slice((j - 1) * self.p, j * self.p)
            for k in range(self.K):
                b1 = self.sensitivity_blocks[0][k]
                bj = self.sensitivity_blocks[j][k]
                c1 = offsets[0] + k * input_dims[0]
                cj = offsets[j] + k * input_dims[j]
                e[rslice, c1:c1 + input_dims[0]] += h * b1
                e[rslice, cj:cj + input_dims[j]] -= h * bj
        return e

    def weight_diagonal(self) -> np.ndarray:
        """Diagonal of the energy quadratic form in the stacked unknowns."""
        h = self.cell_width
        parts = []
        for ai, blocks in zip(self.weights, self.sensitivity_blocks):
            parts.append(np.full(blocks.shape[2] * self.K, ai * h))
        return np.concatenate(parts)


def discretize(prob: FiniteTimeProblem, K: int) -> DiscretizedProblem:
    """Piecewise-constant restriction on K uniform cells of [t0, T]."""
    if K < 2:
        raise ValueError("need at least K = 2 grid cells")
    T = prob.require_horizon()
    grid = np.linspace(prob.t0, T, K + 1)
    mids = 0.5 * (grid[:-1] + grid[1:])
    blocks = []
    terminal = []
    for i, sys_i in enumerate(prob.systems):
        blk = np.array([sys_i.C @ mat_exp(sys_i.A, T - s) @ sys_i.B for s in mids])
        blocks.append(blk)
        terminal.append(sys_i.C @ mat_exp(sys_i.A, T - prob.t0) @ prob.initial_state(i))
    rhs = np.concatenate([terminal[i] - terminal[0] for i in range(1, prob.N)])
    return DiscretizedProblem(grid=grid, sensitivity_blocks=tuple(blocks),
                              weights=prob.a.copy(), constraint_rhs=rhs,
                              terminal_outputs=tuple(terminal))


def solve_min_norm(dp: DiscretizedProblem):
    """Weighted minimum-norm control subject to the discrete constraints.

    Exploits the Gram structure: with M_i = h sum_k B_ik B_ik^T, the Gram
    matrix of the constraints in the weighted inner product has blocks
    (1/a_1) M_1 + delta_jl (1/a_j) M_j, which tends to V2(a) (x) W(t0, T)
    as the grid refines. Returns (u_grid, cost) with u_grid a list of
    (K, m_i) arrays, one per agent.
    """
    h = dp.cell_width
    p = dp.p
    n = dp.n_agents
    moments = [h * np.einsum("kpm,kqm->pq", blk, blk)
               for blk in dp.sensitivity_blocks]

    gram = np.zeros(((n - 1) * p, (n - 1) * p))
    for j in range(1, n):
        for l in range(1, n):
            block = moments[0] / dp.weights[0]
            if j == l:
                block = block + moments[j] / dp.weights[j]
            gram[(j - 1) * p:j * p, (l - 1) * p:l * p] = block
    try:
        chol = scipy.linalg.cho_factor(gram)
    except (scipy.linalg.LinAlgError, ValueError) as exc:
        raise RankDeficientConstraintsError(
            "constraint Gram matrix is not positive definite; constraints "
            "are linearly dependent (is every agent output controllable?)"
        ) from exc
    beta = scipy.linalg.cho_solve(chol, dp.constraint_rhs)
    cost = float(beta @ dp.constraint_rhs)

    beta_blocks = beta.reshape(n - 1, p)
    beta_total = beta_blocks.sum(axis=0)
    u_grid = []
    for i in range(n):
        blk = dp.sensitivity_blocks[i]
        if i == 0:
            u = np.einsum("kpm,p->km", blk, beta_total) / dp.weights[0]
        else:
            u = -np.einsum("kpm,p->km", blk, beta_blocks[i - 1]) / dp.weights[i]
        u_grid.append(u)
    return u_grid, cost


@dataclass(frozen=True)
class CertificationReport:
    """Cost comparison between a law and the discretized oracle."""

    law_kind: str
    law_cost: float
    rows: tuple  # (K, oracle_cost, rel_gap)
    tolerance: float

    @property
    def passed(self) -> bool:
        return abs(self.rows[-1][2]) <= self.tolerance

    def as_text(self) -> str:
        lines = [f"law = {self.law_kind}",
                 f"law_cost = {self.law_cost:.12g}",
                 f"tolerance = {self.tolerance:.3g}",
                 "",
                 f"{'K':>6s} {'oracle_cost':>18s} {'analytic_cost':>18s} {'rel_gap':>12s}"]
        for K, oracle_cost, gap in self.rows:
            lines.append(f"{K:>6d} {oracle_cost:>18.10g} {self.law_cost:>18.10g} "
                         f"{gap:>12.3e}")
        lines.append("")
        lines.append(f"certified = {str(self.passed).lower()}")
        return "\n".join(lines)


def certify(prob: FiniteTimeProblem, law: ControlLaw,
            K_sequence=(32, 64, 128, 256), step: float | None = None,
            tolerance: float = 0.01) -> CertificationReport:
    """Compare a law's realized cost against the refining oracle.

    The law is simulated on the problem horizon and its accumulated cost
    compared with the discrete minimum-norm cost for each K. Certification
    passes when the relative gap at the largest K stays within tolerance
    (default 1 percent).
    """
    traj = simulate(prob, law, step=step)
    law_cost = float(traj.cost_integral[-1])
    rows = []
    for K in sorted(K_sequence):
        _, oracle_cost = solve_min_norm(discretize(prob, int(K)))
        gap = (law_cost - oracle_cost) / oracle_cost
        rows.append((int(K), oracle_cost, gap))
    return CertificationReport(law_kind=law.kind.value, law_cost=law_cost,
                               rows=tuple(rows), tolerance=tolerance)
