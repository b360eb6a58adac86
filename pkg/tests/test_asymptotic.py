import numpy as np
import pytest

import conskit as ck
from conskit.errors import (
    ImaginaryAxisEigenvalueError,
    KernelNotInvariantError,
    NotDetectableError,
    NotStabilizableError,
)
from conskit.laws import LawKind

from conftest import random_offaxis_system, scalar_problem, stable_kernel_system


class TestSolveAre:
    def test_scalar_unstable(self):
        sol = ck.solve_are([[1.0]], [[1.0]])
        np.testing.assert_allclose(sol.P0, [[2.0]], atol=1e-12)
        np.testing.assert_allclose(sol.closed_loop_spectrum, [-1.0], atol=1e-12)

    def test_hurwitz_gives_zero(self):
        sol = ck.solve_are([[-1.0]], [[1.0]])
        assert np.linalg.norm(sol.P0) <= 1e-12
        assert sol.residual <= 1e-12

    def test_decoupled_diagonal(self):
        sol = ck.solve_are(np.diag([1.0, -1.0]), np.eye(2))
        np.testing.assert_allclose(sol.P0, np.diag([2.0, 0.0]), atol=1e-10)

    def test_vanishes_on_stable_subspace(self):
        a = np.array([[1.0, 0.0], [2.0, -3.0]])
        sol = ck.solve_are(a, [[1.0], [0.0]])
        np.testing.assert_allclose(sol.P0, [[2.0, 0.0], [0.0, 0.0]], atol=1e-10)

    def test_random_battery_residual_and_stability(self):
        rng = np.random.default_rng(10)
        count = 0
        while count < 30:
            a, b = random_offaxis_system(rng)
            try:
                sol = ck.solve_are(a, b)
            except NotStabilizableError:
                continue
            count += 1
            p = sol.P0
            assert sol.residual <= 1e-9 * (1.0 + np.linalg.norm(p) ** 2)
            assert np.linalg.norm(p - p.T) <= 1e-10 * (1.0 + np.linalg.norm(p))
            assert np.min(np.linalg.eigvalsh(p)) >= -1e-9 * (1.0 + np.linalg.norm(p))
            assert np.max(sol.closed_loop_spectrum.real) < 0.0

    def test_closed_loop_mirrors_antistable_modes(self):
        rng = np.random.default_rng(11)
        for _ in range(10):
            n = int(rng.integers(2, 6))
            reals = rng.uniform(0.2, 1.5, size=n) * rng.choice([-1.0, 1.0], size=n)
            t = np.diag(reals) + np.triu(rng.normal(scale=0.3, size=(n, n)), k=1)
            q, _ = np.linalg.qr(rng.normal(size=(n, n)))
            a = q @ t @ q.T
            b = rng.normal(size=(n, n))  # full actuation keeps modes controllable
            sol = ck.solve_are(a, b)
            expected = np.sort(-np.abs(reals))
            got = np.sort(sol.closed_loop_spectrum.real)
            assert np.max(np.abs(sol.closed_loop_spectrum.imag)) <= 1e-8
            np.testing.assert_allclose(got, expected, atol=1e-8)

    def test_rejects_imaginary_axis(self):
        with pytest.raises(ImaginaryAxisEigenvalueError):
            ck.solve_are(np.zeros((1, 1)), [[1.0]])
        with pytest.raises(ImaginaryAxisEigenvalueError):
            ck.solve_are([[0.0, 1.0], [-1.0, 0.0]], np.eye(2))

    def test_rejects_unstabilizable(self):
        with pytest.raises(NotStabilizableError):
            ck.solve_are(np.diag([1.0, -1.0]), [[0.0], [1.0]])


class TestSolveDre:
    def test_integrator_closed_form(self):
        sys = ck.LtiSystem(A=[[0.0]], B=[[1.0]], C=[[1.0]])
        for t, T in ((0.0, 1.0), (0.5, 2.0)):
            p = ck.solve_dre(sys, t, T)
            np.testing.assert_allclose(p, [[1.0 / (T - t)]], rtol=1e-10)

    def test_riccati_residual_by_finite_differences(self):
        systems = [
            ck.LtiSystem(A=[[0.0]], B=[[1.0]], C=[[1.0]]),
            ck.LtiSystem(A=[[1.0]], B=[[1.0]], C=[[1.0]]),
            ck.LtiSystem(A=[[1.0, 0.0], [2.0, -3.0]], B=[[1.0], [0.0]], C=np.eye(2)),
        ]
        T = 3.0
        for sys in systems:
            for delta in (0.5, 1.0, 2.0):
                t = T - delta
                h = 1e-5 * delta
                p = ck.solve_dre(sys, t, T)
                dp_dt = (ck.solve_dre(sys, t + h, T) - ck.solve_dre(sys, t - h, T)) / (2 * h)
                bbt = sys.B @ sys.B.T
                rhs = -sys.A.T @ p - p @ sys.A + p @ bbt @ p
                scale = max(np.linalg.norm(rhs), np.linalg.norm(dp_dt))
                assert np.linalg.norm(dp_dt - rhs) <= 1e-4 * scale

    def test_converges_to_algebraic_solution(self):
        scalar = ck.LtiSystem(A=[[1.0]], B=[[1.0]], C=[[1.0]])
        p_inf = ck.solve_are(scalar.A, scalar.B).P0
        assert np.linalg.norm(ck.solve_dre(scalar, 0.0, 20.0) - p_inf) <= 1e-6

        # Equal real parts keep W(0, T) polynomially conditioned at T = 40.
        two_state = ck.LtiSystem(A=[[1.0, 1.0], [0.0, 1.0]], B=np.eye(2),
                                 C=np.eye(2))
        p_inf = ck.solve_are(two_state.A, two_state.B).P0
        horizon = 40.0  # 40 / min |Re eig|
        assert np.linalg.norm(ck.solve_dre(two_state, 0.0, horizon) - p_inf) <= 1e-6

    def test_blows_up_at_short_horizons(self):
        sys = ck.LtiSystem(A=[[0.5, 1.0], [0.0, -0.3]], B=[[0.0], [1.0]],
                           C=np.eye(2))
        near = np.linalg.norm(ck.solve_dre(sys, 0.99, 1.0))
        far = np.linalg.norm(ck.solve_dre(sys, 0.0, 1.0))
        assert near > 50.0 * far


class TestAsymptoticGains:
    def test_scalar_state_gain(self):
        sol = ck.solve_are([[1.0]], [[1.0]])
        k = ck.asymptotic_state_gain([1.0, 1.0], sol)
        np.testing.assert_allclose(k, [[1.0, -1.0], [-1.0, 1.0]], atol=1e-12)

    def test_hurwitz_plant_needs_no_control(self):
        sol = ck.solve_are([[-2.0]], [[1.0]])
        k = ck.asymptotic_state_gain([1.0, 1.0, 1.0], sol)
        assert np.linalg.norm(k) <= 1e-10

    def test_consensual_state_zero_control(self):
        sol = ck.solve_are([[1.0, 0.0], [2.0, -3.0]], [[1.0], [0.0]])
        k = ck.asymptotic_state_gain([1.0, 2.0], sol)
        assert np.linalg.norm(k @ np.tile([0.4, -0.7], 2)) <= 1e-12

    def test_difference_dynamics_decay(self):
        prob = scalar_problem(1.0, T=None)
        law = ck.make_control_law(prob, LawKind.ASYMPTOTIC_STATE)
        traj = ck.simulate(prob, law, step=0.01, t_end=10.0)
        diff = traj.states[:, 0] - traj.states[:, 1]
        np.testing.assert_allclose(diff, 2.0 * np.exp(-traj.times), atol=1e-5)

    def test_full_output_reduces_to_state_gain(self):
        sol = ck.solve_are([[1.0]], [[1.0]])
        sys = ck.LtiSystem(A=[[1.0]], B=[[1.0]], C=[[1.0]])
        np.testing.assert_allclose(ck.asymptotic_output_gain([1.0, 1.0], sys, sol),
                                   ck.asymptotic_state_gain([1.0, 1.0], sol),
                                   atol=1e-12)

    def test_scalar_output_gain_value(self):
        sys = ck.LtiSystem(A=[[1.0]], B=[[1.0]], C=[[1.0]])
        sol = ck.solve_are(sys.A, sys.B)
        ky = ck.asymptotic_output_gain([1.0, 1.0], sys, sol)
        np.testing.assert_allclose(ky, [[1.0, -1.0], [-1.0, 1.0]], atol=1e-10)

    def test_stable_kernel_output_law_equals_state_law(self):
        sys = stable_kernel_system()
        sol = ck.solve_are(sys.A, sys.B)
        k_state = ck.asymptotic_state_gain([1.0, 1.0], sol)
        k_out = ck.asymptotic_output_gain([1.0, 1.0], sys, sol)
        big_c = np.kron(np.eye(2), sys.C)
        np.testing.assert_allclose(k_out @ big_c, k_state, atol=1e-8)

    def test_output_gain_requires_invariant_kernel(self):
        sys = ck.LtiSystem(A=[[0.0, 1.0], [-2.0, -3.0]], B=[[0.0], [1.0]],
                           C=[[1.0, 0.0]])
        sol = ck.solve_are(sys.A, sys.B)
        with pytest.raises(KernelNotInvariantError):
            ck.asymptotic_output_gain([1.0, 1.0], sys, sol)

    def test_weight_scaling_leaves_gains_unchanged(self):
        sys = stable_kernel_system()
        sol = ck.solve_are(sys.A, sys.B)
        a = np.array([0.5, 1.5])
        np.testing.assert_array_equal(ck.asymptotic_state_gain(a, sol),
                                      ck.asymptotic_state_gain(7.0 * a, sol))
        np.testing.assert_array_equal(ck.asymptotic_output_gain(a, sys, sol),
                                      ck.asymptotic_output_gain(7.0 * a, sys, sol))


class TestObserver:
    def test_scalar_observer(self):
        obs = ck.solve_observer_are([[1.0]], [[1.0]])
        np.testing.assert_allclose(obs.Q, [[-2.0]], atol=1e-12)
        np.testing.assert_allclose(obs.error_spectrum, [-1.0], atol=1e-12)

    def test_hurwitz_plant_needs_no_correction(self):
        obs = ck.solve_observer_are([[-1.0]], [[1.0]])
        assert np.linalg.norm(obs.Q) <= 1e-12

    def test_decoupled_diagonal(self):
        obs = ck.solve_observer_are(np.diag([1.0, -1.0]), np.eye(2))
        np.testing.assert_allclose(obs.Q, np.diag([-2.0, 0.0]), atol=1e-10)

    def test_negative_semidefinite_and_consistent(self):
        rng = np.random.default_rng(12)
        for _ in range(10):
            a, c_t = random_offaxis_system(rng, n_max=4)
            c = c_t.T
            try:
                obs = ck.solve_observer_are(a, c)
            except NotDetectableError:
                continue
            q = obs.Q
            assert np.max(np.linalg.eigvalsh(q)) <= 1e-9 * (1.0 + np.linalg.norm(q))
            assert obs.residual <= 1e-9 * (1.0 + np.linalg.norm(q) ** 2)
            assert np.max(obs.error_spectrum.real) < 0.0

    def test_rejects_undetectable(self):
        with pytest.raises(NotDetectableError):
            ck.solve_observer_are(np.diag([1.0, -1.0]), [[0.0, 1.0]])


class TestObserverLaw:
    def test_difference_subsystem_poles(self):
        # Error and regulation dynamics both sit at -1 for the scalar fixture.
        sol = ck.solve_are([[1.0]], [[1.0]])
        obs = ck.solve_observer_are([[1.0]], [[1.0]])
        control_pole = np.linalg.eigvals(np.array([[1.0]]) - sol.P0)
        error_pole = obs.error_spectrum
        np.testing.assert_allclose(control_pole, [-1.0], atol=1e-12)
        np.testing.assert_allclose(error_pole, [-1.0], atol=1e-12)

    def test_consensual_start_is_a_fixed_point(self):
        sys = ck.LtiSystem(A=[[1.0]], B=[[1.0]], C=[[1.0]])
        prob = ck.FiniteTimeProblem(sys, a=[1.0, 1.0], x0=[0.6, 0.6])
        law = ck.make_control_law(prob, LawKind.OBSERVER_BASED)
        traj = ck.simulate(prob, law, step=0.01, t_end=2.0)
        assert np.max(np.abs(traj.controls)) <= 1e-9
        # states stay consensual (both follow the open-loop drift)
        assert np.max(np.abs(traj.states[:, 0] - traj.states[:, 1])) <= 1e-9

    def test_hurwitz_plant_zero_control_still_consensus(self):
        sys = ck.LtiSystem(A=[[-1.0]], B=[[1.0]], C=[[1.0]])
        prob = ck.FiniteTimeProblem(sys, a=[1.0, 1.0], x0=[1.0, -1.0])
        law = ck.make_control_law(prob, LawKind.OBSERVER_BASED)
        traj = ck.simulate(prob, law, step=0.01, t_end=15.0)
        assert np.max(np.abs(traj.controls)) <= 1e-9
        assert ck.consensus_error(traj, 15.0) <= 1e-5

    def test_reaches_output_consensus(self):
        prob = scalar_problem(1.0, T=None)
        law = ck.make_control_law(prob, LawKind.OBSERVER_BASED)
        traj = ck.simulate(prob, law, step=0.01, t_end=30.0)
        assert ck.consensus_error(traj, 30.0) <= 1e-5 * 2.0
        assert traj.observer_states is not None
        assert traj.observer_states.shape == (traj.times.size, 2)

    def test_law_requires_simulator(self):
        sys = ck.LtiSystem(A=[[1.0]], B=[[1.0]], C=[[1.0]])
        sol = ck.solve_are(sys.A, sys.B)
        obs = ck.solve_observer_are(sys.A, sys.C)
        law = ck.observer_consensus_law([1.0, 1.0], sys, sol, obs)
        with pytest.raises(TypeError):
            law.control(0.0, np.zeros(2), np.zeros(2))
