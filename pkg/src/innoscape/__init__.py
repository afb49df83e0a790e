"""Zone-level innovation analytics.

Builds a per-zone feature matrix from census, patent, point-of-interest,
and registry sources, then ranks innovation-enabling factors with a
seed-averaged random-forest importance protocol.
"""

__version__ = "0.1.0"

from .errors import (
    CacheCorruptError,
    ConfigError,
    DegenerateReportError,
    DegenerateRingError,
    DegenerateZoneError,
    DimensionMismatchError,
    DuplicateZoneError,
    InnoscapeError,
    LagMismatchError,
    MalformedRowError,
    MissingColumnError,
    NetworkUnavailableError,
    TooFewRowsError,
    UnknownColumnError,
)

__all__ = [
    "CacheCorruptError",
    "ConfigError",
    "DegenerateReportError",
    "DegenerateRingError",
    "DegenerateZoneError",
    "DimensionMismatchError",
    "DuplicateZoneError",
    "InnoscapeError",
    "LagMismatchError",
    "MalformedRowError",
    "MissingColumnError",
    "NetworkUnavailableError",
    "TooFewRowsError",
    "UnknownColumnError",
    "__version__",
]
