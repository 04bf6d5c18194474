"""Exception hierarchy shared by every module."""


class AmlaserError(Exception):
    """Base class; ``category`` is the machine-readable tag the CLI prints."""

    category = "error"


class ConfigurationError(AmlaserError, ValueError):
    category = "config"


class UnknownModeError(ConfigurationError, KeyError):
    category = "config"

    def __str__(self):
        return Exception.__str__(self)


class BasisMismatchError(AmlaserError, ValueError):
    category = "basis"


class NonHermitianError(AmlaserError, ValueError):
    category = "numeric"


class NormDriftError(AmlaserError, RuntimeError):
    category = "numeric"


class UndefinedStatisticError(AmlaserError, ArithmeticError):
    """Raised when a ratio statistic would divide by a vanishing population."""

    category = "numeric"
