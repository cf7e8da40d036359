"""
Error types shared by the SlowLayers modules.

Numerical modules raise these; the CLI maps them to exit codes.
"""

from typing import Any, Optional


class InvalidArgumentError(ValueError):
    """Argument outside the documented range of an operation."""


class DomainError(ValueError):
    """Minkowski flux evaluated at or beyond the gradient wall |s| < 1."""

    def __init__(self, message: str, cell: Optional[int] = None):
        super().__init__(message)
        self.cell = cell


class ConstraintError(DomainError):
    """A discrete state violates eps^2 |u_x| <= 1 - delta_grad on some face."""


class ConditionError(ValueError):
    """A structural condition of the model (e.g. max F < eps^-2) fails."""


class HypothesisNotMet(ValueError):
    """Closeness hypothesis ||u - v||_L1 <= delta of the lower-bound check fails."""

    def __init__(self, message: str, distance: float, delta: float):
        super().__init__(message)
        self.distance = distance
        self.delta = delta


class StepRejected(RuntimeError):
    """Implicit step failed (Newton divergence or constraint); state untouched."""

    def __init__(self, message: str, reason: str = "newton"):
        super().__init__(message)
        self.reason = reason


class SolverAbort(RuntimeError):
    """Time step underflowed below dt_min; carries the last accepted state."""

    def __init__(self, message: str, snapshot: Any = None, record: Any = None):
        super().__init__(message)
        self.snapshot = snapshot
        self.record = record


class ScenarioError(ValueError):
    """Scenario configuration does not validate."""

    def __init__(self, problems):
        if isinstance(problems, str):
            problems = [problems]
        self.problems = list(problems)
        super().__init__("; ".join(self.problems))


class UndefinedDistance(InvalidArgumentError):
    """Hausdorff distance requested with an empty interface set."""
