import numpy as np
import pytest

import conskit as ck

SCENARIO_DIR = "scenarios"


def single_integrator_problem(a=(1.0, 1.0), x0=(1.0, -1.0), T=1.0):
    sys = ck.LtiSystem(A=[[0.0]], B=[[1.0]], C=[[1.0]])
    return ck.FiniteTimeProblem(sys, a=a, x0=x0, t0=0.0, T=T)


def double_integrator_problem():
    sys = ck.LtiSystem(A=[[0.0, 1.0], [0.0, 0.0]], B=[[0.0], [1.0]], C=np.eye(2))
    return ck.FiniteTimeProblem(sys, a=[1.0, 1.0], x0=[1.0, 0.0, 3.0, 0.0],
                                t0=0.0, T=1.0)


def scalar_problem(a_value, x0=(1.0, -1.0), T=1.0):
    sys = ck.LtiSystem(A=[[a_value]], B=[[1.0]], C=[[1.0]])
    return ck.FiniteTimeProblem(sys, a=[1.0, 1.0], x0=x0, t0=0.0, T=T)


def three_state_problem():
    # Lower-triangular A with the output reading the first state: ker(C)
    # is spanned by e2, e3 and stays A-invariant.
    sys = ck.LtiSystem(
        A=[[-1.0, 0.0, 0.0], [1.0, -2.0, 0.0], [0.0, 1.0, -3.0]],
        B=[[1.0], [0.0], [0.0]],
        C=[[1.0, 0.0, 0.0]],
    )
    return ck.FiniteTimeProblem(sys, a=[1.0, 2.0],
                                x0=[1.0, 0.5, -0.3, -1.0, 0.2, 0.4],
                                t0=0.0, T=1.0)


def stable_kernel_system():
    # ker(C) = span(e2) is A-invariant and carries the stable mode, so
    # C' G0 C = P0 and output feedback reproduces state feedback exactly.
    return ck.LtiSystem(A=[[1.0, 0.0], [2.0, -3.0]], B=[[1.0], [0.0]],
                        C=[[1.0, 0.0]])


def finite_time_battery():
    return [
        ("single_integrator", single_integrator_problem()),
        ("double_integrator", double_integrator_problem()),
        ("scalar_unstable", scalar_problem(1.0)),
        ("scalar_stable", scalar_problem(-1.0)),
        ("three_state_p1", three_state_problem()),
    ]


def random_offaxis_system(rng, n_max=6, min_margin=0.15):
    """Random (A, B) with eigenvalues bounded away from the imaginary axis."""
    n = int(rng.integers(1, n_max + 1))
    reals = rng.uniform(min_margin, 1.5, size=n) * rng.choice([-1.0, 1.0], size=n)
    t = np.diag(reals) + np.triu(rng.normal(scale=0.5, size=(n, n)), k=1)
    q, _ = np.linalg.qr(rng.normal(size=(n, n)))
    a = q @ t @ q.T
    m = int(rng.integers(1, n + 1))
    b = rng.normal(size=(n, m))
    return a, b


def sup_state_difference(t1, t2):
    """Sup-norm state difference on the shared grid points."""
    worst = 0.0
    for k, t in enumerate(t1.times):
        j = t2.index_at(t)
        if abs(t2.times[j] - t) < 1e-12:
            worst = max(worst, float(np.max(np.abs(t1.states[k] - t2.states[j]))))
    return worst


@pytest.fixture(scope="session")
def battery():
    return finite_time_battery()


@pytest.fixture(scope="session")
def battery_runs(battery):
    """Open-loop / state-feedback / output-feedback runs for each fixture."""
    runs = {}
    for name, prob in battery:
        entry = {"prob": prob}
        ol = ck.make_control_law(prob, ck.LawKind.OPEN_LOOP_FT)
        entry["open_loop"] = ck.simulate(prob, ol)
        fb = ck.make_control_law(prob, ck.LawKind.STATE_FEEDBACK_FT)
        entry["state_feedback"] = ck.simulate(prob, fb)
        if ck.is_kernel_A_invariant(prob.sys):
            ofb = ck.make_control_law(prob, ck.LawKind.OUTPUT_FEEDBACK_FT)
            entry["output_feedback"] = ck.simulate(prob, ofb)
        runs[name] = entry
    return runs
