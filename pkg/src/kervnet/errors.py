"""Error taxonomy shared across the package.

Every failure mode callers are expected to handle gets its own class so the
CLI can map them to distinct exit codes.
"""


class KervnetError(Exception):
    """Base class for all package errors."""


class DimensionError(KervnetError):
    """Operand shapes are incompatible (names both shapes in the message)."""


class GeometryError(KervnetError):
    """Sliding-window geometry produces a non-positive output size."""


class StateError(KervnetError):
    """Operation called out of order, e.g. backward before forward."""


class NumericError(KervnetError):
    """Non-finite values where finite ones are required."""


class FormatError(KervnetError):
    """A binary container did not match its expected layout."""


class LengthError(FormatError):
    """A binary container ended before its declared payload."""


class DataError(KervnetError):
    """Dataset contents violate a contract, e.g. label out of range."""


class ConfigError(KervnetError):
    """Run configuration is malformed or contains unknown keys."""


class DivergenceError(KervnetError):
    """Training produced a non-finite loss; message carries epoch/batch."""
