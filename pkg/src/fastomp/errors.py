"""Exception types raised across the package."""


class FastOMPError(Exception):
    """Base class for all package errors."""


class DataError(FastOMPError):
    """Input data could not be read or is malformed."""


class NumericalError(FastOMPError):
    """A numerical breakdown (rank collapse, singular system, ...)."""


class DimensionError(FastOMPError, ValueError):
    pass


class ParameterError(FastOMPError, ValueError):
    pass


class RankDeficiencyError(NumericalError):
    """A column is numerically in the span of the columns before it.

    ``column`` is the offending column position within the matrix being
    factored; solvers translate it to the atom index.  ``partial``
    optionally carries the solver result accumulated before the breakdown.
    """

    def __init__(self, message, column=None, partial=None):
        super().__init__(message)
        self.column = column
        self.partial = partial


class SingularSystemError(NumericalError):
    pass


class DegenerateAtomError(DataError):
    def __init__(self, message, column=None):
        super().__init__(message)
        self.column = column


class ExhaustedDictionaryError(NumericalError):
    pass


class ZeroResidualError(NumericalError):
    pass


class DegenerateResidualError(NumericalError):
    pass


class InstanceTooLargeError(ParameterError):
    pass


class ParseError(DataError):
    def __init__(self, message, line=None):
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)
        self.line = line
