"""
Every error raised by qeflim derives from QEFLIMError. The `exit_code` class
attribute is what the command line returns when the error reaches it.
"""


class QEFLIMError(Exception):
    exit_code = 1


class UsageError(QEFLIMError):
    exit_code = 1


class InputError(QEFLIMError, ValueError):
    exit_code = 2


class FormatError(InputError):
    def __init__(self, message, index=None):
        super().__init__(message)
        self.index = index


class UnsupportedVersionError(FormatError):
    pass


class StreamOrderError(InputError):
    def __init__(self, message, index=None):
        super().__init__(message)
        self.index = index


class FieldRangeError(InputError):
    def __init__(self, message, index=None):
        super().__init__(message)
        self.index = index


class CoverageError(InputError):
    pass


class ShapeError(InputError):
    pass


class ConfigError(InputError):
    def __init__(self, message, line=None):
        if line is not None:
            message = "line {}: {}".format(line, message)
        super().__init__(message)
        self.line = line


class ChannelError(InputError):
    pass


class EmptyScanError(InputError):
    pass


class DomainError(InputError):
    pass


class NumericalError(QEFLIMError):
    exit_code = 3


class ConvergenceError(NumericalError):
    def __init__(self, message, estimate=None, error_bound=None):
        super().__init__("{} (estimate {}, error bound {})".format(
            message, estimate, error_bound))
        self.estimate = estimate
        self.error_bound = error_bound


class FitError(NumericalError):
    pass


class IdentifiabilityError(NumericalError):
    pass


class ModelError(NumericalError):
    pass


class TruncatedStreamWarning(UserWarning):
    pass


class ExcludedPhotonsWarning(UserWarning):
    pass


class QuadratureTruncationWarning(UserWarning):
    pass
