"""Exception types raised across the package."""


class TredError(Exception):
    """Base class for all package errors."""


class DomainError(TredError, ValueError):
    """Argument outside the domain of an operation (bad time, dimension mismatch)."""


class InsufficientDataError(TredError, ValueError):
    """Not enough samples to compute the requested quantity."""


class ParameterError(TredError, ValueError):
    """Invalid or infeasible parameter combination."""


class ContainmentError(TredError, ValueError):
    """A trajectory leaves the base square of a tree."""

    def __init__(self, message, trajectory_id=None):
        super().__init__(message)
        self.trajectory_id = trajectory_id


class NoPathError(TredError):
    """Two graph vertices are not connected."""


class DegeneratePathError(TredError, ValueError):
    """A requested path would consist of a single point."""


class EvaluationError(TredError):
    """Map evaluation could not find usable vertex pairs."""


class FormatError(TredError, ValueError):
    """Malformed input file; the message names file and line."""
