"""Shared exception types."""


class OrdposeError(ValueError):
    """Base class for all toolkit errors."""


class InvalidInputError(OrdposeError):
    """Non-finite or otherwise malformed numeric input."""


class DimensionMismatchError(OrdposeError):
    """Array shapes or joint counts do not agree."""


class DegenerateGeometryError(OrdposeError):
    """Point configuration too degenerate for the requested alignment."""


class ContractViolationError(OrdposeError):
    """A documented precondition was violated by the caller."""


class ProtocolError(OrdposeError):
    """Annotation session driven out of order (answer without question, etc.)."""


class DataError(OrdposeError):
    """Dataset or sample lacks required annotations."""


class TrainingDivergenceError(OrdposeError):
    """Non-finite loss or gradients encountered during optimization."""

    def __init__(self, message: str, step: int | None = None):
        super().__init__(message)
        self.step = step
