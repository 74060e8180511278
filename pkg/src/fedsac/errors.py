"""Exception types raised across the package."""


class FedSaCError(Exception):
    """Base class for all errors raised by this package."""


class InvalidInput(FedSaCError, ValueError):
    pass


class DimensionMismatch(FedSaCError, ValueError):
    pass


class DegenerateVector(FedSaCError, ValueError):
    """A zero-norm vector was given where a direction is required."""


class FormatError(FedSaCError, ValueError):
    """A data file does not match its declared on-disk format."""


class ConfigError(FedSaCError, ValueError):
    pass


class OutputError(FedSaCError, OSError):
    """The output directory could not be created or written."""


def with_context(exc: FedSaCError, context: str) -> FedSaCError:
    """Return a copy of ``exc`` of the same type with ``context`` prefixed."""
    new = type(exc)(f"{context}: {exc}")
    new.__cause__ = exc
    return new
