import numpy as np
import pytest

import conskit as ck
from conskit.errors import DisconnectedGraphWarning, NonFiniteStateError
from conskit.laws import ConstantGainLaw, LawKind
from conskit.linalg import mat_exp

from conftest import scalar_problem, single_integrator_problem


def zero_law(prob):
    shape = (prob.layout.total_inputs, prob.layout.total_states)
    return ConstantGainLaw(np.zeros(shape), uses_output=False,
                           kind=LawKind.ASYMPTOTIC_STATE)


class TestSimulate:
    def test_zero_law_keeps_drift_free_states_constant(self):
        prob = single_integrator_problem()
        traj = ck.simulate(prob, zero_law(prob), step=0.05, t_end=2.0)
        np.testing.assert_array_equal(traj.states[0], traj.states[-1])
        assert traj.cost_integral[-1] == 0.0

    def test_single_integrator_optimal_run(self):
        prob = single_integrator_problem()
        law = ck.make_control_law(prob, LawKind.STATE_FEEDBACK_FT)
        traj = ck.simulate(prob, law)
        np.testing.assert_allclose(traj.states[:, 0], 1.0 - traj.times, atol=1e-9)
        np.testing.assert_allclose(traj.states[:, 1], traj.times - 1.0, atol=1e-9)
        assert ck.consensus_error(traj, 1.0) <= 1e-9

    def test_outputs_are_c_times_states(self):
        prob = single_integrator_problem()
        law = ck.make_control_law(prob, LawKind.OPEN_LOOP_FT)
        traj = ck.simulate(prob, law, step=0.01)
        np.testing.assert_array_equal(traj.outputs, traj.states)

    def test_rk4_fourth_order_convergence(self):
        prob = scalar_problem(1.0, T=None)
        law = ck.make_control_law(prob, LawKind.ASYMPTOTIC_STATE)
        closed = np.kron(np.eye(2), prob.sys.A) - np.kron(
            np.eye(2), prob.sys.B) @ law.gain
        exact = mat_exp(closed, 2.0) @ prob.x0
        errors = []
        for step in (0.1, 0.05):
            traj = ck.simulate(prob, law, step=step, t_end=2.0)
            errors.append(np.linalg.norm(traj.states[-1] - exact))
        assert errors[0] / errors[1] >= 8.0

    def test_rk45_matches_rk4(self):
        prob = scalar_problem(-1.0, T=None)
        law = ck.make_control_law(prob, LawKind.ASYMPTOTIC_STATE)
        t4 = ck.simulate(prob, law, step=0.01, t_end=3.0)
        t45 = ck.simulate(prob, law, step=0.01, t_end=3.0, method="rk45")
        np.testing.assert_array_equal(t4.times, t45.times)
        assert np.max(np.abs(t4.states - t45.states)) <= 1e-8

    def test_rk45_through_switch(self):
        prob = single_integrator_problem()
        law = ck.make_control_law(prob, LawKind.STATE_FEEDBACK_FT)
        traj = ck.simulate(prob, law, step=1e-3, method="rk45")
        assert ck.consensus_error(traj, 1.0) <= 1e-8

    def test_non_finite_state_reported(self):
        prob = scalar_problem(1.0, T=None)
        # positive feedback: u = +10 x destabilizes the already unstable plant
        law = ConstantGainLaw(-10.0 * np.eye(2), uses_output=False,
                              kind=LawKind.ASYMPTOTIC_STATE)
        with np.errstate(over="ignore", invalid="ignore"):
            with pytest.raises(NonFiniteStateError, match="t ="):
                ck.simulate(prob, law, step=0.5, t_end=80.0)

    def test_explicit_grid_validation(self):
        prob = single_integrator_problem()
        law = ck.make_control_law(prob, LawKind.OPEN_LOOP_FT)
        with pytest.raises(ValueError, match="start at t0"):
            ck.simulate(prob, law, grid=np.array([0.5, 1.0]))
        with pytest.raises(ValueError, match="increasing"):
            ck.simulate(prob, law, grid=np.array([0.0, 0.0, 1.0]))
        fb = ck.make_control_law(prob, LawKind.STATE_FEEDBACK_FT)
        with pytest.raises(ValueError, match="switch"):
            ck.simulate(prob, fb, grid=np.linspace(0.0, 1.0, 11))

    def test_asymptotic_run_requires_t_end(self):
        prob = scalar_problem(1.0, T=None)
        law = ck.make_control_law(prob, LawKind.ASYMPTOTIC_STATE)
        with pytest.raises(ValueError, match="t_end"):
            ck.simulate(prob, law, step=0.01)


class TestCost:
    def test_zero_control_zero_cost(self):
        prob = single_integrator_problem()
        traj = ck.simulate(prob, zero_law(prob), step=0.1, t_end=1.0)
        assert ck.accumulate_cost(traj, [1.0, 1.0]) == 0.0

    def test_single_integrator_energy(self):
        prob = single_integrator_problem()
        law = ck.make_control_law(prob, LawKind.STATE_FEEDBACK_FT)
        traj = ck.simulate(prob, law)
        assert abs(ck.accumulate_cost(traj, [1.0, 1.0]) - 2.0) <= 1e-4

    def test_constant_control_exact_bookkeeping(self):
        prob = single_integrator_problem()
        law = ck.make_control_law(prob, LawKind.OPEN_LOOP_FT)
        traj = ck.simulate(prob, law, step=0.02)
        # u is exactly (-1, +1): the trapezoidal rule is exact
        assert abs(traj.cost_integral[-1] - 2.0) <= 1e-8 * 2.0

    def test_cost_linear_in_weights(self):
        prob = single_integrator_problem()
        law = ck.make_control_law(prob, LawKind.OPEN_LOOP_FT)
        traj = ck.simulate(prob, law, step=0.05)
        base = ck.accumulate_cost(traj, [1.0, 2.0])
        doubled = ck.accumulate_cost(traj, [2.0, 4.0])
        assert doubled == pytest.approx(2.0 * base, rel=1e-14)


class TestConsensusError:
    def test_consensual_outputs(self):
        prob = single_integrator_problem(x0=(0.3, 0.3))
        traj = ck.simulate(prob, zero_law(prob), step=0.1, t_end=1.0)
        assert ck.consensus_error(traj, 0.5) == 0.0

    def test_initial_spread(self):
        prob = single_integrator_problem()
        law = ck.make_control_law(prob, LawKind.STATE_FEEDBACK_FT)
        traj = ck.simulate(prob, law)
        assert ck.consensus_error(traj, 0.0) == pytest.approx(2.0)
        assert ck.consensus_error(traj, 1.0) <= 1e-6


class TestTranslationInvariance:
    def test_relative_laws_ignore_common_shifts(self):
        rng = np.random.default_rng(6)
        prob = single_integrator_problem()
        for _ in range(5):
            v = float(rng.normal())
            shifted = ck.FiniteTimeProblem(prob.sys, a=prob.a,
                                           x0=prob.x0 + v, t0=0.0, T=1.0)
            t_base = ck.simulate(prob,
                                 ck.make_control_law(prob, LawKind.STATE_FEEDBACK_FT),
                                 step=5e-3)
            t_shift = ck.simulate(shifted,
                                  ck.make_control_law(shifted, LawKind.STATE_FEEDBACK_FT),
                                  step=5e-3)
            assert np.max(np.abs(t_base.controls - t_shift.controls)) <= 1e-10
            # drift-free dynamics: the trajectories differ by the constant shift
            assert np.max(np.abs(t_shift.states - t_base.states - v)) <= 1e-10


class TestTopology:
    def test_graph_validation(self):
        with pytest.raises(ValueError, match="self-loop"):
            ck.TopologyGraph(N=3, edges=((0, 0),))
        with pytest.raises(ValueError, match="out of range"):
            ck.TopologyGraph(N=2, edges=((0, 5),))
        with pytest.raises(ValueError, match="positive"):
            ck.TopologyGraph(N=2, edges=((0, 1),), edge_weights=(0.0,))

    def test_laplacian_of_a_path(self):
        graph = ck.TopologyGraph(N=3, edges=((0, 1), (1, 2)), edge_weights=(2.0, 1.0))
        expected = [[2.0, -2.0, 0.0], [-2.0, 3.0, -1.0], [0.0, -1.0, 1.0]]
        np.testing.assert_array_equal(ck.graph_laplacian(graph), expected)

    def test_connectivity(self):
        assert ck.TopologyGraph(N=3, edges=((0, 1), (1, 2))).is_connected()
        assert not ck.TopologyGraph(N=3, edges=((0, 1),)).is_connected()

    def test_disconnected_graph_warns_but_constructs(self):
        graph = ck.TopologyGraph(N=3, edges=())
        with pytest.warns(DisconnectedGraphWarning):
            law = ck.topology_restricted_controller(graph, lambda t: np.eye(1))
        assert law is not None

    def test_complete_graph_reproduces_optimal_cost(self):
        # Uniform weights: L(a) equals the complete-graph Laplacian scaled
        # by 1/N, and the per-agent gain 1/(T - t) is the optimal one.
        prob = single_integrator_problem()
        graph = ck.TopologyGraph(N=2, edges=((0, 1),), edge_weights=(0.5,))
        t_switch = 1.0 - 1e-3
        law = ck.topology_restricted_controller(
            graph, lambda t: np.array([[1.0 / (1.0 - t)]]), freeze_time=t_switch)
        traj = ck.simulate(prob, law, step=2e-4)
        assert abs(traj.cost_integral[-1] - 2.0) <= 5e-3 * 2.0
        assert ck.consensus_error(traj, 1.0) <= 1e-2

    def test_ring_is_suboptimal(self):
        sys = ck.LtiSystem(A=[[0.0]], B=[[1.0]], C=[[1.0]])
        prob = ck.FiniteTimeProblem(sys, a=[1.0] * 4,
                                    x0=[1.0, -1.0, 2.0, 0.5], T=1.0)
        ring = ck.TopologyGraph(N=4, edges=((0, 1), (1, 2), (2, 3), (3, 0)))
        optimal = ck.optimal_cost(prob)
        spread = 3.0  # max pairwise |x_i - x_j| at t0
        gain, traj = ck.tune_restricted_gain(prob, ring, np.eye(1),
                                             target_error=1e-6 * spread,
                                             step=1e-3)
        assert ck.consensus_error(traj, 1.0) <= 1e-6 * spread
        assert traj.cost_integral[-1] > optimal + 1e-6


class TestCsv:
    def test_format_and_determinism(self, tmp_path):
        prob = single_integrator_problem()
        law = ck.make_control_law(prob, LawKind.OPEN_LOOP_FT)
        traj = ck.simulate(prob, law, step=0.25)
        path_a = tmp_path / "a.csv"
        path_b = tmp_path / "b.csv"
        ck.write_trajectory_csv(traj, path_a)
        ck.write_trajectory_csv(traj, path_b)
        assert path_a.read_bytes() == path_b.read_bytes()
        lines = path_a.read_text().strip().splitlines()
        assert lines[0] == "t,agent,state_1,output_1,control_1,cost_cum"
        assert len(lines) == 1 + 2 * traj.times.size
        first = lines[1].split(",")
        assert first[0] == "0" and first[1] == "1"
        assert float(first[4]) == pytest.approx(-1.0)

    def test_heterogeneous_padding(self, tmp_path):
        s1 = ck.LtiSystem(A=[[0.0, 1.0], [0.0, 0.0]], B=[[0.0], [1.0]], C=[[1.0, 0.0]])
        s2 = ck.LtiSystem(A=[[-1.0]], B=[[1.0]], C=[[1.0]])
        prob = ck.FiniteTimeProblem(systems=[s1, s2], a=[1.0, 1.0],
                                    x0=[1.0, 0.0, -1.0], T=1.0)
        law = ck.make_control_law(prob, LawKind.HETEROGENEOUS_FT)
        traj = ck.simulate(prob, law, step=0.5)
        path = tmp_path / "mixed.csv"
        ck.write_trajectory_csv(traj, path)
        lines = path.read_text().strip().splitlines()
        assert lines[0] == "t,agent,state_1,state_2,output_1,control_1,cost_cum"
        # agent 2 has a single state; its state_2 cell is empty
        agent2 = lines[2].split(",")
        assert agent2[1] == "2" and agent2[3] == ""
