"""Exception hierarchy. Each family maps onto one CLI exit code."""


class EntropyCPDError(ValueError):
    exit_code = 1


class ConfigError(EntropyCPDError):
    """Invalid parameters or configuration."""

    exit_code = 2


class DataError(EntropyCPDError):
    """Input data cannot support the requested computation."""

    exit_code = 3


class ZeroProbabilityError(DataError):
    """A reference distribution has an empty category where one is not allowed."""


class NumericalValidityError(EntropyCPDError):
    """A formula is evaluated outside its domain of validity."""

    exit_code = 4


class DomainError(NumericalValidityError):
    """Argument outside the mathematical domain of a special function."""
