"""Exception types shared across the emedge modules."""


class EmedgeError(Exception):
    """Base class for all emedge errors."""


class ConfigurationError(EmedgeError):
    """Invalid configuration; the message names the offending field."""


class ValidationError(EmedgeError):
    """Input data violates a documented precondition or invariant."""


class OrderingError(ValidationError):
    """Timestamps handed to a sequential operation went backwards."""


class MalformedMessage(ValidationError):
    """A wire message could not be parsed into a telemetry sample."""


class StorageError(EmedgeError):
    """The persistence layer could not complete an operation."""


class NotFoundError(EmedgeError):
    """Lookup by key or id found nothing."""


class ConflictError(EmedgeError):
    """The operation clashes with existing state (e.g. double feedback)."""


class BackpressureError(EmedgeError):
    """A bounded queue is full and the caller must slow down."""
