"""Exception hierarchy shared across the package.

The CLI maps these onto exit codes: UsageError -> 1, DataError -> 2,
NumericError -> 3.
"""


class RadnmtError(Exception):
    """Base class for all errors raised by this package."""


class UsageError(RadnmtError):
    """Bad flags, unknown config keys, invalid parameter values."""


class ConfigError(UsageError):
    """Inconsistent or invalid model/training configuration."""


class DataError(RadnmtError):
    """Malformed input files, vocabulary problems, misaligned corpora."""


class NumericError(RadnmtError):
    """Non-finite values or numerically impossible requests."""


class ShapeError(NumericError):
    """Tensor operands with incompatible shapes."""


class TapeError(UsageError):
    """Misuse of the differentiation tape (e.g. backward after clear)."""


class ContractError(RadnmtError):
    """A caller violated an operation's documented precondition."""
