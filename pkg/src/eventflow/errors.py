"""Exception types shared across the package."""


class EventFlowError(Exception):
    """Base class for all package errors."""


class InvalidGeometryError(EventFlowError, ValueError):
    """Raised for non-finite coordinates or degenerate rings."""


class InvalidArgumentError(EventFlowError, ValueError):
    pass


class ResourceLimitError(EventFlowError):
    """A requested grid or buffer exceeds the configured cap."""


class NoVarianceError(EventFlowError, ValueError):
    pass


class EmptyFlowTableError(EventFlowError, ValueError):
    pass


class StoreReadError(EventFlowError, OSError):
    """The record store could not be read; ``offset`` is the byte offset."""

    def __init__(self, message, offset=None):
        super().__init__(message if offset is None else f"{message} (at byte offset {offset})")
        self.offset = offset


class ConfigError(EventFlowError):
    pass


class DataError(EventFlowError):
    pass
