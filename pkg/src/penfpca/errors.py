"""Exception hierarchy.

``InputError`` subclasses describe bad user input (CLI exit code 2),
``NumericalError`` subclasses describe failures of the numerics on
well-formed input (CLI exit code 3).
"""


class FPCAError(Exception):
    """Base class for all package errors."""


class InputError(FPCAError, ValueError):
    pass


class NumericalError(FPCAError, ArithmeticError):
    pass


# grid / penalty
class GridTooSmall(InputError):
    pass


class NonIncreasingGrid(InputError):
    pass


class GridMismatch(InputError):
    pass


class EigenFailure(NumericalError):
    pass


# shared argument checks
class NegativeAlpha(InputError):
    pass


class DimensionMismatch(InputError):
    pass


class DimensionError(InputError):
    pass


# rank-one fitting
class ZeroMatrix(NumericalError):
    pass


class NoConvergence(NumericalError):
    pass


# selection
class ZeroScores(NumericalError):
    pass


class DegenerateLeverage(NumericalError):
    pass


class SingularReducedSystem(NumericalError):
    pass


# fpca
class TooFewRows(InputError):
    pass


class ZeroResidual(NumericalError):
    pass


# simulation
class AllZeroDiffs(InputError):
    pass


class StudyFailed(NumericalError):
    pass


# io
class ParseError(InputError):
    pass


class RaggedRows(ParseError):
    pass


class NonNumericCell(ParseError):
    pass


class GridLengthMismatch(InputError):
    pass


class NegativeCount(InputError):
    pass
