EXIT_CODE_PARSE = 2
EXIT_CODE_PRECONDITION = 3
EXIT_CODE_NUMERIC = 4


class CovertException(Exception):
    exit_code = EXIT_CODE_PRECONDITION


class CovertExceptionParseError(CovertException):
    exit_code = EXIT_CODE_PARSE


class CovertExceptionNonStochasticRow(CovertException):
    exit_code = EXIT_CODE_PARSE


class CovertExceptionDimensionMismatch(CovertException):
    exit_code = EXIT_CODE_PARSE


class CovertExceptionSupportViolation(CovertException):
    pass


class CovertExceptionOutOfRange(CovertException):
    pass


class CovertExceptionRedundantNoInput(CovertException):
    """the warden can not tell silence from a mixture of other inputs"""

    pass


class CovertExceptionAbsoluteContinuityViolation(CovertException):
    pass


class CovertExceptionDegenerateDenominator(CovertException):
    pass


class CovertExceptionConditionViolated(CovertException):
    exit_code = EXIT_CODE_NUMERIC


class CovertExceptionUnsupportedRate(CovertException):
    pass


class CovertExceptionOutsideRegion(CovertException):
    pass


class CovertExceptionEmptyCodebook(CovertException):
    pass


class CovertExceptionTooFewSamples(CovertException):
    pass


class CovertExceptionPrecondition(CovertException):
    pass


class CovertExceptionNumericFailure(CovertException):
    exit_code = EXIT_CODE_NUMERIC
