"""conskit: minimum-energy output consensus for linear multi-agent systems.

Synthesizes the optimal finite-time rendezvous controllers (open-loop,
state-feedback, output-feedback and heterogeneous variants), their
asymptotic Riccati-based counterparts and an observer-based output law;
simulates the closed loops; and certifies optimality against an
independent discretized minimum-norm oracle.
"""

from . import errors
from .asymptotic import (
    ObserverDesign,
    RiccatiSolution,
    asymptotic_output_gain,
    asymptotic_state_gain,
    observer_consensus_law,
    solve_are,
    solve_dre,
    solve_observer_are,
)
from .finite_time import (
    FiniteTimeProblem,
    default_eps_switch,
    heterogeneous_controller,
    make_control_law,
    open_loop_control,
    optimal_cost,
    output_feedback_gain,
    predict_consensus_point,
    state_feedback_gain,
)
from .gramian import (
    GramianResult,
    LtiSystem,
    expm_with_gramian,
    is_kernel_A_invariant,
    is_output_controllable,
    output_gramian,
    projection_identity_residual,
    related_gramian,
)
from .laws import AgentLayout, ControlLaw, LawKind
from .linalg import (
    QuadratureConfig,
    integrate_matrix,
    kron,
    mat_exp,
    nullspace_basis,
)
from .oracle import (
    CertificationReport,
    DiscretizedProblem,
    certify,
    discretize,
    solve_min_norm,
)
from .scenario import Scenario, load_scenario
from .sim import (
    TopologyGraph,
    Trajectory,
    accumulate_cost,
    consensus_error,
    graph_laplacian,
    simulate,
    topology_restricted_controller,
    tune_restricted_gain,
    write_trajectory_csv,
)
from .weights import (
    alpha,
    check_weights,
    consensus_weight_matrix,
    factor_matrices,
    verify_factorization,
)

__version__ = "0.1.0"

__all__ = [
    "errors",
    "QuadratureConfig",
    "mat_exp",
    "integrate_matrix",
    "kron",
    "nullspace_basis",
    "check_weights",
    "alpha",
    "consensus_weight_matrix",
    "factor_matrices",
    "verify_factorization",
    "LtiSystem",
    "GramianResult",
    "output_gramian",
    "related_gramian",
    "expm_with_gramian",
    "is_output_controllable",
    "is_kernel_A_invariant",
    "projection_identity_residual",
    "FiniteTimeProblem",
    "default_eps_switch",
    "open_loop_control",
    "state_feedback_gain",
    "output_feedback_gain",
    "predict_consensus_point",
    "heterogeneous_controller",
    "optimal_cost",
    "make_control_law",
    "LawKind",
    "ControlLaw",
    "AgentLayout",
    "RiccatiSolution",
    "ObserverDesign",
    "solve_are",
    "solve_dre",
    "asymptotic_state_gain",
    "asymptotic_output_gain",
    "solve_observer_are",
    "observer_consensus_law",
    "Trajectory",
    "TopologyGraph",
    "simulate",
    "accumulate_cost",
    "consensus_error",
    "graph_laplacian",
    "topology_restricted_controller",
    "tune_restricted_gain",
    "write_trajectory_csv",
    "DiscretizedProblem",
    "discretize",
    "solve_min_norm",
    "certify",
    "CertificationReport",
    "Scenario",
    "load_scenario",
    "__version__",
]
