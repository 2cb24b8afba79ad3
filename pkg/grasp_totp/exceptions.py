"""
Exception hierarchy for the grasp planning library.

Every error carries the process exit code the CLI reports for it.
"""
from typing import Optional


class GraspPlanningError(Exception):
    """Base class for all library errors"""
    exit_code: int = 1


class ConfigError(GraspPlanningError):
    """A configuration document could not be parsed or validated"""
    exit_code = 2

    def __init__(self, message: str, path: Optional[str] = None,
                 key: Optional[str] = None, line: Optional[int] = None):
        self.path = path
        self.key = key
        self.line = line
        location = []
        if path:
            location.append(str(path))
        if line is not None:
            location.append(f"line {line}")
        if key:
            location.append(f"key '{key}'")
        prefix = f"{', '.join(location)}: " if location else ""
        super().__init__(f"{prefix}{message}")


class InvalidTransform(GraspPlanningError):
    """Rotation block is not a proper rotation"""


class DimensionMismatch(GraspPlanningError):
    """Array dimensions are inconsistent"""


class NonPlanarGripper(GraspPlanningError):
    """A cup normal is not parallel to the tool z-axis"""


class SingularSystem(GraspPlanningError):
    """The distribution system A W^-1 A^T is ill conditioned"""
    exit_code = 3


class DegenerateGripper(GraspPlanningError):
    """Cup geometry cannot resist a full 6D wrench"""
    exit_code = 3


class LpInfeasible(GraspPlanningError):
    """Linear program has no feasible point"""

    def __init__(self, message: str, knot: Optional[int] = None, row_label: Optional[str] = None):
        self.knot = knot
        self.row_label = row_label
        if knot is not None:
            message = f"{message} (knot {knot}, row {row_label})"
        super().__init__(message)


class LpUnbounded(GraspPlanningError):
    """Linear program objective is unbounded below"""


class NumericalFailure(GraspPlanningError):
    """Solver stalled or lost numerical accuracy"""


class StaticallyInfeasible(GraspPlanningError):
    """The object cannot be held at rest somewhere along the path"""
    exit_code = 4

    def __init__(self, knot: int, row_label: str, margin: float):
        self.knot = knot
        self.row_label = row_label
        self.margin = margin
        super().__init__(
            f"object cannot be held at rest at knot {knot}: {row_label} violated by {-margin:.6g}"
        )


class NotConverged(GraspPlanningError):
    """Sequential LP did not converge within the iteration cap"""
    exit_code = 5


class InsufficientData(GraspPlanningError):
    """Too few samples for weight fitting"""
    exit_code = 6


class DegenerateFit(GraspPlanningError):
    """Fit objective is flat; parameters are not identifiable"""
