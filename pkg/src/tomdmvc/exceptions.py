"""Exception hierarchy shared by all modules."""


class TomdError(Exception):
    """Base class for errors raised by this package."""


class ValidationError(TomdError, ValueError):
    """Invalid user input (shapes, ranks, indexes, files)."""


class ModeIndexError(ValidationError, IndexError):
    pass


class ShapeError(ValidationError):
    pass


class NetworkError(ValidationError):
    pass


class RankError(ValidationError):
    pass


class DegenerateReferenceError(ValidationError):
    pass


class SymmetryError(ValidationError):
    pass


class AffinityError(ValidationError):
    pass


class IngestionError(ValidationError):
    pass


class NumericalError(TomdError, ArithmeticError):
    """A solver produced a result that fails its own accuracy check."""
