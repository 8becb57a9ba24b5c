"""Exception hierarchy shared by the solver modules."""


class DomainError(ValueError):
    """An argument lies outside the domain of a function (e.g. negative entropy input)."""


class SolverError(RuntimeError):
    """Base class for failures inside the iterative solvers."""

    def __init__(self, message, trace=None):
        super().__init__(message)
        self.trace = trace


class MinresBreakdown(SolverError):
    """MINRES produced non-finite values."""


class StepError(SolverError):
    """The Newton step could not be computed to the requested accuracy."""

    def __init__(self, message, trace=None, best=None, relres=None):
        super().__init__(message, trace)
        self.best = best
        self.relres = relres


class LineSearchError(SolverError):
    """Backtracking failed to find an acceptable step length."""


class ConvergenceError(SolverError):
    """The Newton method hit its iteration cap before reaching tolerance."""


class CertificationError(RuntimeError):
    """A candidate point could not be turned into a valid bound certificate."""
