"""Exception hierarchy.

Validation errors map to CLI exit code 2, numerical failures to exit code 4.
"""


class PLLError(Exception):
    pass


class ValidationError(PLLError, ValueError):
    """Input that would violate a data invariant."""


class NumericalError(PLLError, ArithmeticError):
    """Optimization or arithmetic went somewhere it should not."""


class EmptySet(ValidationError):
    pass


class FullSet(ValidationError):
    pass


class OutOfRange(ValidationError):
    pass


class KTooLarge(ValidationError):
    pass


class ShapeMismatch(ValidationError):
    pass


class DegenerateMatrix(ValidationError):
    pass


class ZeroRow(ValidationError):
    pass


class ZeroConfidence(NumericalError):
    pass


class NonFiniteLoss(NumericalError):
    pass


class NonConvergence(NumericalError):
    pass


# data-io
class ParseError(ValidationError):
    def __init__(self, message, row=None):
        self.row = row
        if row is not None:
            message = f"row {row}: {message}"
        super().__init__(message)


class LabelOutOfRange(ParseError):
    pass


class RaggedRows(ParseError):
    pass


class EmptyCandidates(ParseError):
    pass


class FullCandidates(ParseError):
    pass


class BadIndex(ParseError):
    pass


class BadMagic(ValidationError):
    pass


class CountMismatch(ValidationError):
    pass


class Truncated(ValidationError):
    pass
