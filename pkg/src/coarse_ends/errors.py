"""Exception hierarchy shared by the library and the CLI."""


class CoarseEndsError(Exception):
    """Base class for all errors raised by this package."""


class DomainError(CoarseEndsError, ValueError):
    """An argument lies outside the domain of an operation (empty set, point outside the ball...)."""


class CapacityError(CoarseEndsError):
    """A construction would exceed the configured point cap."""

    def __init__(self, cap, what="ball"):
        super().__init__(f"{what} exceeds the capacity cap of {cap} points (raise it with --cap)")
        self.cap = cap


class ConfigurationError(CoarseEndsError, ValueError):
    """A description names something that cannot be resolved."""


class OrderError(CoarseEndsError, ValueError):
    """Two scales are not comparable in the required direction."""


class ConsistencyError(CoarseEndsError):
    """A measured construction violated a containment it relies on."""


class SchemaError(ConfigurationError):
    """A description document failed schema validation."""

    def __init__(self, message, pointer="/"):
        super().__init__(f"{pointer}: {message}")
        self.pointer = pointer
