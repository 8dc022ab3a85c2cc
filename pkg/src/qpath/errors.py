"""Exception hierarchy shared across the package."""


class QPathError(Exception):
    """Base class for all library errors."""


class ValidationError(QPathError):
    """A scenario, world, or parameter failed semantic validation."""


class OutOfBoundsError(ValidationError):
    """An obstacle, endpoint, or cell lies outside the grid."""


class EndpointBlockedError(ValidationError):
    """Source, destination, or survivor is occupied at tick 0."""


class ParseError(QPathError):
    """A scenario/suite/tables file is malformed.

    The message names the offending field (and the line for JSON
    syntax errors).
    """


class UnreadableImageError(QPathError):
    """A map image could not be opened or decoded."""


class DegenerateDimsError(ValidationError):
    """Requested ingestion dimensions are not positive."""


class BlockedError(QPathError):
    """The target of an action is occupied or outside the grid."""


class ZeroVectorError(QPathError):
    """Amplitude encoding received an all-zero vector."""


class SameWireError(QPathError):
    """CNOT control and target are the same wire."""


class DeadEndError(QPathError):
    """A state has no feasible action."""


class NoPathError(QPathError):
    """Search exhausted the frontier without reaching the goal."""


class IoError(QPathError):
    """A report or artifact could not be written."""
