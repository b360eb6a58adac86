"""Command line entry point.

Subcommands:
    run                synthesize, simulate, write CSV + summary + figures
    certify            cross-check a finite-time law against the oracle
    compare-topology   tune a restricted-topology law and compare costs
    check              load and validate a scenario, then exit
"""

from __future__ import annotations

import argparse
import sys
from pathlib import Path

import numpy as np

from . import oracle, report, sim
from .errors import ConskitError
from .finite_time import make_control_law, optimal_cost, predict_consensus_point
from .errors import InitialStateNotInKernelError
from .laws import LawKind
from .scenario import Scenario, load_scenario

_FINITE_KINDS = {LawKind.OPEN_LOOP_FT, LawKind.STATE_FEEDBACK_FT,
                 LawKind.OUTPUT_FEEDBACK_FT, LawKind.HETEROGENEOUS_FT}


def _build_parser():
    parser = argparse.ArgumentParser(
        prog="conskit",
        description="Minimum-energy output consensus: synthesis, simulation "
                    "and certification for linear multi-agent systems.")
    sub = parser.add_subparsers(dest="command", required=True)

    def add_common(p):
        p.add_argument("scenario", help="path to a scenario file")
        p.add_argument("--out-dir", default=None,
                       help="artifact directory (default from scenario, else 'out')")
        p.add_argument("--step", type=float, default=None,
                       help="integration step (default horizon/2000)")
        p.add_argument("--method", choices=["rk4", "rk45"], default=None,
                       help="integrator (default from scenario, else rk4)")
        p.add_argument("--tol-consensus", type=float, default=1e-6,
                       help="consensus tolerance relative to the initial spread")
        p.add_argument("--eps-switch", type=float, default=None,
                       help="terminal switch window for finite-time feedback laws")

    add_common(sub.add_parser("run", help="simulate the scenario"))
    certify_p = sub.add_parser("certify", help="oracle certification")
    add_common(certify_p)
    certify_p.add_argument("--grid-sizes", type=int, nargs="+", default=None,
                           help="oracle grid refinements (default from scenario)")
    add_common(sub.add_parser("compare-topology",
                              help="compare a restricted topology against the optimum"))
    check_p = sub.add_parser("check", help="validate a scenario file")
    check_p.add_argument("scenario", help="path to a scenario file")
    return parser


def _effective(scenario: Scenario, args):
    step = args.step if args.step is not None else scenario.step
    method = args.method if args.method is not None else scenario.method
    eps = args.eps_switch if args.eps_switch is not None else scenario.eps_switch
    return step, method, eps


def _out_dir(scenario: Scenario, args) -> Path:
    if args.out_dir is not None:
        return Path(args.out_dir)
    return Path(scenario.out_dir or "out")


def _spread(traj) -> float:
    return sim.consensus_error(traj, traj.times[0])


def _run_law(scenario: Scenario, step, method, eps):
    law = make_control_law(scenario.problem, scenario.kind, eps_switch=eps)
    traj = sim.simulate(scenario.problem, law, step=step, method=method,
                        t_end=scenario.t_end)
    return law, traj


def cmd_run(args) -> int:
    scenario = load_scenario(args.scenario)
    out_dir = _out_dir(scenario, args)
    out_dir.mkdir(parents=True, exist_ok=True)
    step, method, eps = _effective(scenario, args)
    law, traj = _run_law(scenario, step, method, eps)

    csv_path = out_dir / "trajectory.csv"
    sim.write_trajectory_csv(traj, csv_path)
    figures = report.render_trajectory_figures(traj, out_dir)

    spread = _spread(traj)
    final_t = traj.times[-1]
    final_error = sim.consensus_error(traj, final_t)
    # Scale the tolerance by the worst disagreement seen during the run
    # (initial outputs may already coincide), with a roundoff floor.
    peak = float(np.max(report.pairwise_error_curve(traj)))
    floor = 1e-12 * max(1.0, float(np.max(np.abs(traj.outputs))))
    threshold = args.tol_consensus * peak + floor
    entries = {
        "scenario": scenario.name,
        "controller": scenario.kind.value,
        "agents": scenario.problem.N,
        "t0": scenario.problem.t0,
        "t_final": float(final_t),
        "step": float(traj.times[1] - traj.times[0]),
        "method": method,
        "initial_spread": spread,
        "consensus_error_final": final_error,
        "consensus_tolerance": threshold,
        "consensus_ok": bool(final_error <= threshold),
        "total_cost": float(traj.cost_integral[-1]),
    }
    if scenario.kind in _FINITE_KINDS:
        entries["optimal_cost"] = optimal_cost(scenario.problem)
        if scenario.problem.homogeneous:
            try:
                point = predict_consensus_point(scenario.problem)
            except InitialStateNotInKernelError:
                pass
            else:
                entries["predicted_consensus_point"] = point
                final_outputs = traj.outputs[-1].reshape(
                    scenario.problem.N, scenario.problem.layout.p)
                entries["consensus_point_error"] = float(
                    np.max(np.linalg.norm(final_outputs - point, axis=1)))
    entries["trajectory_csv"] = csv_path.name
    entries["figures"] = [p.name for p in figures]
    report.write_summary(out_dir / "summary.txt", entries)

    print(f"wrote {csv_path}")
    print(f"wrote {out_dir / 'summary.txt'}")
    print(f"consensus_error_final = {report.format_value(final_error)}")
    print(f"total_cost = {report.format_value(float(traj.cost_integral[-1]))}")
    return 0


def cmd_certify(args) -> int:
    scenario = load_scenario(args.scenario)
    if scenario.kind not in _FINITE_KINDS:
        raise ConskitError("certify applies to finite-time controllers only")
    out_dir = _out_dir(scenario, args)
    out_dir.mkdir(parents=True, exist_ok=True)
    step, method, eps = _effective(scenario, args)
    law = make_control_law(scenario.problem, scenario.kind, eps_switch=eps)
    grids = tuple(args.grid_sizes) if args.grid_sizes else scenario.oracle_grids
    rep = oracle.certify(scenario.problem, law, K_sequence=grids, step=step)

    (out_dir / "certification.txt").write_text(rep.as_text() + "\n")
    figure = report.render_certification_figure(rep, out_dir)
    entries = {
        "scenario": scenario.name,
        "controller": scenario.kind.value,
        "law_cost": rep.law_cost,
        "oracle_cost_final": rep.rows[-1][1],
        "rel_gap_final": rep.rows[-1][2],
        "certified": rep.passed,
        "figures": [figure.name],
    }
    report.write_summary(out_dir / "summary.txt", entries)
    print(rep.as_text())
    return 0


def cmd_compare_topology(args) -> int:
    scenario = load_scenario(args.scenario)
    if scenario.topology is None:
        raise ConskitError("scenario has no [topology] section to compare")
    if scenario.kind not in _FINITE_KINDS:
        raise ConskitError("compare-topology needs a finite-time controller")
    out_dir = _out_dir(scenario, args)
    out_dir.mkdir(parents=True, exist_ok=True)
    step, method, eps = _effective(scenario, args)
    prob = scenario.problem

    _, traj_opt = _run_law(scenario, step, method, eps)
    cost_opt = float(traj_opt.cost_integral[-1])
    spread = _spread(traj_opt)
    target = args.tol_consensus * max(spread, 1e-30)

    sys0 = prob.systems[0]
    base_direction = sys0.B.T @ sys0.C.T
    try:
        gain, traj_res = sim.tune_restricted_gain(
            prob, scenario.topology, base_direction, target,
            step=step, method=method, t_end=scenario.t_end)
    except ValueError as exc:
        raise ConskitError(str(exc)) from exc
    cost_res = float(traj_res.cost_integral[-1])
    margin = cost_res - cost_opt

    figure = report.render_comparison_figure(
        traj_opt.times, report.pairwise_error_curve(traj_opt),
        traj_res.times, report.pairwise_error_curve(traj_res), out_dir)
    entries = {
        "scenario": scenario.name,
        "controller": scenario.kind.value,
        "optimal_cost": cost_opt,
        "restricted_cost": cost_res,
        "suboptimality_margin": margin,
        "tuned_gain": gain,
        "restricted_consensus_error": sim.consensus_error(traj_res, traj_res.times[-1]),
        "consensus_tolerance": target,
        "figures": [figure.name],
    }
    comparison = [
        f"optimal_cost = {report.format_value(cost_opt)}",
        f"restricted_cost = {report.format_value(cost_res)}",
        f"suboptimality_margin = {report.format_value(margin)}",
        f"tuned_gain = {report.format_value(gain)}",
    ]
    (out_dir / "comparison.txt").write_text("\n".join(comparison) + "\n")
    report.write_summary(out_dir / "summary.txt", entries)
    print("\n".join(comparison))
    return 0


def cmd_check(args) -> int:
    scenario = load_scenario(args.scenario)
    print(f"scenario {scenario.name}: OK")
    print(f"controller = {scenario.kind.value}")
    print(f"agents = {scenario.problem.N}")
    return 0


_COMMANDS = {
    "run": cmd_run,
    "certify": cmd_certify,
    "compare-topology": cmd_compare_topology,
    "check": cmd_check,
}


def main(argv=None) -> int:
    parser = _build_parser()
    args = parser.parse_args(argv)
    try:
        return _COMMANDS[args.command](args)
    except ConskitError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
