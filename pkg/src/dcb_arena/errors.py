"""Exception types shared across the package."""


class ValidationError(ValueError):
    """Inputs violate a documented precondition, invariant or file schema."""


class PersistenceError(OSError):
    """Reading or writing an artifact failed; carries the offending path."""

    def __init__(self, message: str, path=None):
        super().__init__(message)
        self.path = path


class NotFoundError(LookupError):
    """A requested record is absent (e.g. missing dataset id)."""


class UnsupportedOperationError(RuntimeError):
    """The operation needs data the caller did not ask the producer to record."""
