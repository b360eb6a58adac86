"""Exception hierarchy shared by all conskit modules."""


class ConskitError(Exception):
    """Base class for all errors raised by conskit."""


class NonSquareMatrixError(ConskitError):
    """A square matrix was required (e.g. for the matrix exponential)."""


class ToleranceNotMetError(ConskitError):
    """Adaptive quadrature exhausted its bisection budget before converging."""


class DegenerateIntervalError(ConskitError):
    """A Gramian was requested on an empty or reversed time interval."""


class SingularInnerMatrixError(ConskitError):
    """An inner matrix that must be inverted is numerically singular."""


class KernelNotInvariantError(ConskitError):
    """ker(C) is not invariant under the state matrix, so output feedback
    is not equivalent to state feedback."""


class NotOutputControllableError(ConskitError):
    """The output controllability Gramian is singular beyond tolerance."""


class NearSingularHorizonError(ConskitError):
    """Feedback gain requested too close to the terminal time, where the
    horizon Gramian becomes near-singular; use the switch protocol."""


class InitialStateNotInKernelError(ConskitError):
    """Consensus-point prediction requires every initial state in ker(A)."""


class ImaginaryAxisEigenvalueError(ConskitError):
    """The state matrix has an eigenvalue (numerically) on the imaginary
    axis, so the stabilizing Riccati solution does not exist."""


class NotStabilizableError(ConskitError):
    """(A, B) has an uncontrollable antistable mode."""


class NotDetectableError(ConskitError):
    """(A, C) has an unobservable antistable mode."""


class NonFiniteStateError(ConskitError):
    """Simulation produced NaN/Inf state values."""


class RankDeficientConstraintsError(ConskitError):
    """The discretized consensus constraints are not linearly independent."""


class ParseError(ConskitError):
    """Scenario file could not be parsed.

    Carries the offending path and line number when known.
    """

    def __init__(self, message, path=None, line=None):
        self.path = path
        self.line = line
        loc = ""
        if path is not None:
            loc = f"{path}:"
            if line is not None:
                loc += f"{line}:"
            loc += " "
        super().__init__(loc + message)


class ValidationError(ConskitError):
    """Scenario contents violate a module precondition."""


class DisconnectedGraphWarning(UserWarning):
    """The comparison topology is not connected; consensus may be unreachable."""
