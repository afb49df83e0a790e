"""Exception taxonomy shared across the package.

Structural damage in inputs raises; recoverable oddities are surfaced as
counted warnings by the functions that encounter them.
"""


class InnoscapeError(Exception):
    """Base class for all package errors."""


class ConfigError(InnoscapeError):
    """Run configuration is missing, malformed, or inconsistent."""


class LagMismatchError(ConfigError):
    """Outcome year minus base year violates the required lag."""


class MissingColumnError(InnoscapeError):
    """A required column is absent from a delimited input file."""

    def __init__(self, path: str, column: str):
        super().__init__(f"{path}: required column {column!r} not found")
        self.path = path
        self.column = column


class MalformedRowError(InnoscapeError):
    """A row is structurally unusable (wrong field count, empty key)."""

    def __init__(self, path: str, line_no: int, reason: str):
        super().__init__(f"{path}:{line_no}: {reason}")
        self.path = path
        self.line_no = line_no
        self.reason = reason


class DuplicateZoneError(InnoscapeError):
    """The same zone appears twice in a one-row-per-zone source."""

    def __init__(self, path: str, line_no: int, zone: str):
        super().__init__(f"{path}:{line_no}: duplicate zone {zone}")
        self.path = path
        self.line_no = line_no
        self.zone = zone


class NetworkUnavailableError(InnoscapeError):
    """A live fetch was required but the network could not be reached."""


class CacheCorruptError(InnoscapeError):
    """A cached response body does not match its recorded digest."""


class DegenerateRingError(InnoscapeError):
    """A polygon ring is unclosed or has too few vertices."""


class DegenerateZoneError(InnoscapeError):
    """A zone-level computation hit a zero or negative denominator."""


class TooFewRowsError(InnoscapeError):
    """Not enough complete rows to fit a model."""


class DimensionMismatchError(InnoscapeError):
    """Query vector width does not match the trained feature count."""


class UnknownColumnError(InnoscapeError):
    """A requested matrix column does not exist."""


class DegenerateReportError(InnoscapeError):
    """An importance report carries no signal (all importances zero)."""
