"""Scenario files: a small plain-text format for experiment fixtures.

Grammar (documented with examples in the README): named sections in
square brackets, one `key = value` pair per line, values in Python
literal syntax (scalars, lists, nested lists for matrices) or bare words
for enumerated settings. Full-line comments start with '#'.

    [system]
    A = [[0.0, 1.0], [0.0, 0.0]]
    B = [[0.0], [1.0]]
    C = [[1.0, 0.0], [0.0, 1.0]]

    [problem]
    controller = state_feedback
    weights = [1.0, 1.0]
    t0 = 0.0
    horizon = 1.0
    x0_1 = [1.0, 0.0]
    x0_2 = [3.0, 0.0]

Heterogeneous teams use [system.1] .. [system.N] instead of [system].
Optional sections: [integrator] (step, method, eps_switch), [oracle]
(grid_sizes), [topology] (edges as 1-based pairs, edge_weights), and
[output] (dir, overridable with --out-dir).
"""

from __future__ import annotations

import ast
import re
from dataclasses import dataclass
from pathlib import Path

from . import asymptotic
from .errors import ConskitError, ParseError, ValidationError
from .finite_time import FiniteTimeProblem
from .gramian import LtiSystem, is_kernel_A_invariant
from .laws import LawKind
from .sim import TopologyGraph

__all__ = ["Scenario", "load_scenario", "CONTROLLER_NAMES"]

CONTROLLER_NAMES = {
    "open_loop": LawKind.OPEN_LOOP_FT,
    "state_feedback": LawKind.STATE_FEEDBACK_FT,
    "output_feedback": LawKind.OUTPUT_FEEDBACK_FT,
    "heterogeneous": LawKind.HETEROGENEOUS_FT,
    "asymptotic_state": LawKind.ASYMPTOTIC_STATE,
    "asymptotic_output": LawKind.ASYMPTOTIC_OUTPUT,
    "observer": LawKind.OBSERVER_BASED,
}

_FINITE_KINDS = {LawKind.OPEN_LOOP_FT, LawKind.STATE_FEEDBACK_FT,
                 LawKind.OUTPUT_FEEDBACK_FT, LawKind.HETEROGENEOUS_FT}

_SECTION_RE = re.compile(r"^\[([A-Za-z0-9_.]+)\]$")
_BAREWORD_RE = re.compile(r"^[A-Za-z0-9_.\-]+$")


@dataclass(frozen=True)
class Scenario:
    """A fully validated experiment description."""

    name: str
    path: str | None
    kind: LawKind
    problem: FiniteTimeProblem
    t_end: float | None
    step: float | None
    method: str
    eps_switch: float | None
    oracle_grids: tuple
    topology: TopologyGraph | None
    out_dir: str | None = None

    @property
    def horizon(self) -> float | None:
        return self.problem.T


def _parse_sections(text: str, path=None):
    sections: dict[str, dict] = {}
    current = None
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        header = _SECTION_RE.match(line)
        if header:
            name = header.group(1)
            if name in sections:
                raise ParseError(f"duplicate section [{name}]", path, lineno)
            sections[name] = {}
            current = name
            continue
        if "=" not in line:
            raise ParseError(f"expected 'key = value', got {line!r}", path, lineno)
        if current is None:
            raise ParseError("key/value pair before any [section]", path, lineno)
        key, value_text = (part.strip() for part in line.split("=", 1))
        if not key.isidentifier():
            raise ParseError(f"bad key {key!r}", path, lineno)
        if key in sections[current]:
            raise ParseError(f"duplicate key {key!r} in [{current}]", path, lineno)
        try:
            value = ast.literal_eval(value_text)
        except (ValueError, SyntaxError):
            if not _BAREWORD_RE.match(value_text):
                raise ParseError(f"cannot parse value {value_text!r}", path, lineno)
            value = value_text
        sections[current][key] = value
    return sections


def _take(section: dict, section_name: str, key: str, required=True, default=None):
    if key not in section:
        if required:
            raise ValidationError(f"[{section_name}] is missing key {key!r}")
        return default
    return section.pop(key)


def _reject_leftovers(section: dict, section_name: str):
    if section:
        extra = ", ".join(sorted(section))
        raise ValidationError(f"[{section_name}] has unknown keys: {extra}")


def _build_system(section: dict, name: str) -> LtiSystem:
    a = _take(section, name, "A")
    b = _take(section, name, "B")
    c = _take(section, name, "C")
    _reject_leftovers(section, name)
    try:
        return LtiSystem(A=a, B=b, C=c)
    except (ValueError, TypeError) as exc:
        raise ValidationError(f"[{name}]: {exc}") from exc


def load_scenario(path) -> Scenario:
    """Parse and fully validate a scenario file.

    Raises ParseError with file/line context on malformed input and
    ValidationError naming the violated precondition otherwise.
    """
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise ParseError(f"cannot read scenario: {exc}", str(path))
    sections = _parse_sections(text, str(path))

    problem_sec = sections.pop("problem", None)
    if problem_sec is None:
        raise ValidationError("scenario needs a [problem] section")

    controller = _take(problem_sec, "problem", "controller")
    if controller not in CONTROLLER_NAMES:
        known = ", ".join(sorted(CONTROLLER_NAMES))
        raise ValidationError(
            f"[problem] controller: unknown kind {controller!r} (one of {known})")
    kind = CONTROLLER_NAMES[controller]

    weights = _take(problem_sec, "problem", "weights")
    try:
        n_agents = len(weights)
    except TypeError:
        raise ValidationError("[problem] weights must be a list of positive numbers")

    # Plants: one shared [system] or per-agent [system.i].
    homogeneous = "system" in sections
    numbered = sorted(k for k in sections if k.startswith("system."))
    if homogeneous and numbered:
        raise ValidationError("give either [system] or [system.i] sections, not both")
    if homogeneous:
        systems = None
        shared = _build_system(sections.pop("system"), "system")
    elif numbered:
        expected = [f"system.{i}" for i in range(1, n_agents + 1)]
        if numbered != expected:
            raise ValidationError(
                f"per-agent systems must be sections {expected[0]} .. {expected[-1]}")
        systems = [_build_system(sections.pop(name), name) for name in expected]
        shared = None
    else:
        raise ValidationError("scenario needs a [system] (or [system.i]) section")

    t0 = float(_take(problem_sec, "problem", "t0", required=False, default=0.0))
    horizon = _take(problem_sec, "problem", "horizon", required=False)
    t_end = _take(problem_sec, "problem", "t_end", required=False)
    if kind in _FINITE_KINDS:
        if horizon is None:
            raise ValidationError(
                f"[problem] horizon is required for controller = {controller}")
    else:
        if t_end is None:
            raise ValidationError(
                f"[problem] t_end is required for controller = {controller}")
        if horizon is not None:
            raise ValidationError(
                f"[problem] horizon does not apply to controller = {controller}")
        if not float(t_end) > t0:
            raise ValidationError("[problem] t_end must exceed t0")

    x0_parts = []
    for i in range(1, n_agents + 1):
        x0_parts.append(_take(problem_sec, "problem", f"x0_{i}"))
    _reject_leftovers(problem_sec, "problem")
    flat_x0 = []
    for i, part in enumerate(x0_parts, start=1):
        if isinstance(part, (int, float)):
            part = [part]
        flat_x0.extend(float(v) for v in part)

    try:
        if homogeneous:
            problem = FiniteTimeProblem(
                shared, a=weights, x0=flat_x0, t0=t0,
                T=None if horizon is None else float(horizon))
        else:
            problem = FiniteTimeProblem(
                systems=systems, a=weights, x0=flat_x0, t0=t0,
                T=None if horizon is None else float(horizon))
    except ConskitError as exc:
        raise ValidationError(str(exc)) from exc
    except (ValueError, TypeError) as exc:
        raise ValidationError(f"[problem]: {exc}") from exc

    # Controller-specific preconditions surface at load time.
    if kind is LawKind.OUTPUT_FEEDBACK_FT and not is_kernel_A_invariant(problem.sys):
        raise ValidationError(
            "controller = output_feedback needs ker(C) A-invariant "
            "(is_kernel_A_invariant failed)")
    if kind in (LawKind.ASYMPTOTIC_STATE, LawKind.ASYMPTOTIC_OUTPUT,
                LawKind.OBSERVER_BASED):
        if not problem.homogeneous:
            raise ValidationError(f"controller = {controller} needs a shared [system]")
        sys = problem.sys
        try:
            sol = asymptotic.solve_are(sys.A, sys.B)
            if kind is LawKind.ASYMPTOTIC_OUTPUT:
                asymptotic.asymptotic_output_gain(problem.a, sys, sol)
            if kind is LawKind.OBSERVER_BASED:
                asymptotic.solve_observer_are(sys.A, sys.C)
        except ConskitError as exc:
            raise ValidationError(f"controller = {controller}: {exc}") from exc

    integrator = sections.pop("integrator", {})
    step = _take(integrator, "integrator", "step", required=False)
    method = str(_take(integrator, "integrator", "method", required=False,
                       default="rk4")).lower()
    if method not in ("rk4", "rk45"):
        raise ValidationError(f"[integrator] method must be rk4 or rk45, got {method!r}")
    eps_switch = _take(integrator, "integrator", "eps_switch", required=False)
    _reject_leftovers(integrator, "integrator")
    if step is not None and not float(step) > 0.0:
        raise ValidationError("[integrator] step must be positive")
    if eps_switch is not None and not float(eps_switch) > 0.0:
        raise ValidationError("[integrator] eps_switch must be positive")

    oracle_sec = sections.pop("oracle", {})
    grids = _take(oracle_sec, "oracle", "grid_sizes", required=False,
                  default=[32, 64, 128, 256])
    _reject_leftovers(oracle_sec, "oracle")
    try:
        oracle_grids = tuple(int(k) for k in grids)
    except TypeError:
        raise ValidationError("[oracle] grid_sizes must be a list of integers")
    if any(k < 2 for k in oracle_grids):
        raise ValidationError("[oracle] grid_sizes entries must be >= 2")

    output_sec = sections.pop("output", {})
    out_dir = _take(output_sec, "output", "dir", required=False)
    _reject_leftovers(output_sec, "output")

    topology = None
    topo_sec = sections.pop("topology", None)
    if topo_sec is not None:
        edges = _take(topo_sec, "topology", "edges")
        edge_weights = _take(topo_sec, "topology", "edge_weights",
                             required=False, default=[])
        _reject_leftovers(topo_sec, "topology")
        try:
            topology = TopologyGraph(
                N=problem.N,
                edges=tuple((int(i) - 1, int(j) - 1) for i, j in edges),
                edge_weights=tuple(edge_weights))
        except (ValueError, TypeError) as exc:
            raise ValidationError(f"[topology]: {exc}") from exc

    if sections:
        extra = ", ".join(sorted(sections))
        raise ValidationError(f"unknown sections: {extra}")

    return Scenario(
        name=path.stem,
        path=str(path),
        kind=kind,
        problem=problem,
        t_end=None if t_end is None else float(t_end),
        step=None if step is None else float(step),
        method=method,
        eps_switch=None if eps_switch is None else float(eps_switch),
        oracle_grids=oracle_grids,
        topology=topology,
        out_dir=None if out_dir is None else str(out_dir),
    )
