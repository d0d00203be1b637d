"""Exception hierarchy shared by the package."""


class LinkedTwistError(Exception):
    """Base class for every error raised by linkedtwist."""


class RegimeError(LinkedTwistError, ValueError):
    """Parameters leave the center-existence regime."""


class DomainError(LinkedTwistError, ValueError):
    """A point lies on or outside the open phase domain."""


class IntegrationError(LinkedTwistError, RuntimeError):
    """The ODE integrator could not continue.

    ``last_state`` and ``last_time`` hold the last accepted step.
    """

    def __init__(self, message, last_time=None, last_state=None):
        super().__init__(message)
        self.last_time = last_time
        self.last_state = last_state


class CrossingTimeout(IntegrationError):
    """No section crossing was found within the time cap."""


class NoLevelError(LinkedTwistError, ValueError):
    """Requested energy is not above the minimum energy."""


class DomainExhaustedError(LinkedTwistError, ValueError):
    """A root along a ray could not be bracketed before the domain boundary."""


class AngleUndefinedError(LinkedTwistError, ValueError):
    """The polar angle about a reference point is undefined (too close)."""


class LinkModeError(LinkedTwistError, ValueError):
    """Annuli do not fit the requested linkage geometry."""


class NotLinkedError(LinkedTwistError):
    """Annuli fail the linkage definition; ``witness`` names the violation."""

    def __init__(self, message, witness=None):
        super().__init__(message)
        self.witness = witness


class DegeneracyError(LinkedTwistError):
    """An intersection rectangle has (numerically) zero width."""


class ScheduleError(LinkedTwistError, ValueError):
    """A switching schedule is inconsistent."""


class ResolutionError(LinkedTwistError):
    """Sampling too coarse to resolve the image of a path."""


class DepthExceededError(LinkedTwistError):
    """Nested interval refinement stalled."""


class ScenarioError(LinkedTwistError, ValueError):
    """Scenario file could not be parsed or validated."""

    def __init__(self, message, line=None, column=None):
        where = ""
        if line is not None:
            where = f" (line {line}" + (f", column {column}" if column is not None else "") + ")"
        super().__init__(message + where)
        self.line = line
        self.column = column


class MonotonicityError(LinkedTwistError, ValueError):
    """Periods of an annulus are not strictly increasing with the energy."""


class PreconditionError(LinkedTwistError, ValueError):
    """A required earlier verification did not pass."""
