"""Exception hierarchy shared by every subsystem.

The CLI maps these onto exit codes: usage/configuration problems exit 1,
data/format/binding/shape problems exit 2, numeric failures exit 3.
"""


class RfpqeError(Exception):
    exit_code = 2


class UsageError(RfpqeError, ValueError):
    exit_code = 1


class ConfigurationError(RfpqeError, ValueError):
    exit_code = 1


class DimensionError(RfpqeError, ValueError):
    pass


class DataError(RfpqeError):
    pass


class FormatError(DataError):
    pass


class BindingError(DataError):
    pass


class ComputationError(RfpqeError, ArithmeticError):
    pass


class NumericError(RfpqeError, ArithmeticError):
    exit_code = 3
