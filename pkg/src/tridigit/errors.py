"""Exception hierarchy shared by all toolkit modules.

Every error that a caller may want to branch on gets its own class; the CLI
maps them onto exit codes (parse -> 1, invariant -> 2, infeasible -> 3).
"""


class ToolkitError(Exception):
    """Base class for all tridigit errors."""


# geometry kernel ------------------------------------------------------------

class PointInsideCircle(ToolkitError):
    """Tangent requested from a point on or inside the circle."""


class ParallelAxis(ToolkitError):
    """Line is parallel to the reference plane (no intersection)."""


# four-bar mechanism ---------------------------------------------------------

class UnreachableClosure(ToolkitError):
    """No real loop-closure solution at the requested crank angle."""


class SingularConfiguration(ToolkitError):
    """Transmission moment arm below threshold; force/tension unbounded."""


class EmptyStroke(ToolkitError):
    """Stroke interval is empty (theta_min >= theta_max)."""


class NonPositiveSpeed(ToolkitError):
    """Input speed must be strictly positive for time computations."""


class AllSingular(ToolkitError):
    """Force curve has no non-singular sample to evaluate."""


class CalibrationInfeasible(ToolkitError):
    """Stroke calibration cannot satisfy its hard requirements."""

    def __init__(self, message, diagnostics=None):
        super().__init__(message)
        self.diagnostics = diagnostics or {}


# cable transmission ---------------------------------------------------------

class RouteDegenerate(ToolkitError):
    """Cable route geometry is invalid (anchor swallowed, overlapping elements)."""


class SlackCable(ToolkitError):
    """Cable cannot be taut: no root of L(theta) = L0 in the joint range."""


class AmbiguousRoot(ToolkitError):
    """Multiple taut configurations in the joint range; not silently resolved."""

    def __init__(self, message, roots_deg=None):
        super().__init__(message)
        self.roots_deg = list(roots_deg or [])


# thumb axis design ----------------------------------------------------------

class KinematicsInfeasible(ToolkitError):
    """Coupled kinematics unsolvable at a required pose."""


class NoFeasiblePoint(ToolkitError):
    """Search budget exhausted without a feasible axis placement."""


# analysis I/O ---------------------------------------------------------------

class ParseError(ToolkitError):
    """Project file is malformed (bad JSON, unknown or missing field)."""


class InvariantViolation(ToolkitError):
    """A loaded object violates one of its declared invariants."""

    def __init__(self, invariant, message=None):
        super().__init__(message or invariant)
        self.invariant = invariant
