"""Exception hierarchy shared by every module of the package."""


class PositioningError(Exception):
    """Base class for all domain failures raised by nrpos."""


class ConfigError(PositioningError, ValueError):
    """A configuration object violates one of its invariants."""


class ConfigConflict(ConfigError):
    """Two gNBs resolve to the same PRS slot."""


class ParseError(ConfigError):
    """A scenario file could not be parsed.

    ``location`` carries a ``line N`` or dotted field path when known.
    """

    def __init__(self, message, location=None):
        self.location = location
        if location:
            message = f"{location}: {message}"
        super().__init__(message)


class UnknownParameter(ConfigError):
    pass


class SlotNotScheduled(PositioningError):
    pass


class DuplicateDelay(PositioningError, ValueError):
    pass


class EmptyReference(PositioningError):
    pass


class AllZero(PositioningError):
    pass


class MissingReference(PositioningError):
    pass


class InsufficientData(PositioningError):
    pass


class InvalidHyperbola(PositioningError):
    """Corrected RSTD gives |a| >= d, so the hyperbola does not exist."""


class CoincidentFoci(PositioningError):
    pass


class DegenerateGeometry(PositioningError):
    pass


class LengthMismatch(PositioningError, ValueError):
    pass


class NoConvergenceWarning(UserWarning):
    """Solver hit the iteration cap; the best iterate is still returned."""
