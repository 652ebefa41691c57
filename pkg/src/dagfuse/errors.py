"""Exception hierarchy shared across the package."""


class DagfuseError(Exception):
    """Base class for all package errors."""


class InputError(DagfuseError, ValueError):
    """Malformed or inconsistent user input."""


class GraphError(InputError):
    pass


class CycleDetected(GraphError):
    pass


class SelfLoop(GraphError):
    pass


class DuplicateEdge(GraphError):
    pass


class VertexOutOfRange(GraphError):
    pass


class DimensionMismatch(InputError):
    pass


class InvalidPenalty(InputError):
    pass


class InvalidProbabilityVector(InputError):
    pass


class EmptySample(InputError):
    pass


class OutcomeOutOfRange(InputError):
    pass


class EmptyInput(InputError):
    pass


class TooLarge(InputError):
    pass


class PreconditionViolated(InputError):
    pass


class NotConverged(DagfuseError):
    """Iteration budget exhausted; ``result`` carries the last iterate and diagnostics."""

    def __init__(self, message: str, result=None, index: int | None = None):
        super().__init__(message)
        self.result = result
        self.index = index


class ProbabilityContractViolated(DagfuseError):
    """A smoothed pmf left the probability simplex; indicates a solver bug."""
