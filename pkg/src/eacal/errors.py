"""Exception hierarchy.

Data problems (bad files, inconsistent dimensions) and numerical problems
(degenerate templates, delays outside the observation window) are kept
apart so the CLI can map them to distinct exit codes.
"""


class EacalError(Exception):
    """Base class for all package errors."""


class DataError(EacalError, ValueError):
    """Input data is malformed or inconsistent."""


class ParseError(DataError):
    def __init__(self, message, record=None, line=None):
        self.record = record
        self.line = line
        where = []
        if record is not None:
            where.append(f"record {record}")
        if line is not None:
            where.append(f"line {line}")
        if where:
            message = f"{message} ({', '.join(where)})"
        super().__init__(message)


class DimensionMismatchError(DataError):
    pass


class MissingReferenceError(DataError):
    pass


class EmptySetError(DataError):
    pass


class CoincidentPointsError(DataError):
    pass


class NumericalError(EacalError, ArithmeticError):
    """A computation has no well-defined result for the given inputs."""


class DelayOverflowError(NumericalError):
    pass


class ZeroTemplateError(NumericalError):
    pass
