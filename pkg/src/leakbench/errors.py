"""Exception hierarchy shared across the package.

Each class maps onto one CLI exit code (see ``leakbench.cli``).
"""


class LeakbenchError(Exception):
    """Base class for all package errors."""


class ConfigError(LeakbenchError, ValueError):
    """A configuration value is out of range or inconsistent."""

    def __init__(self, field, message):
        self.field = field
        super().__init__(f"{field}: {message}")


class PreconditionError(LeakbenchError, ValueError):
    """An operation was called with arguments that violate its preconditions."""


class DataError(LeakbenchError, ValueError):
    """Input data is missing required content (ratings, labels, classes)."""


class FormatError(DataError):
    """An on-disk artifact is malformed or inconsistent with its metadata."""


class InvariantError(LeakbenchError, RuntimeError):
    """An internal consistency check failed."""
