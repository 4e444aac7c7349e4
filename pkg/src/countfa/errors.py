"""Exception hierarchy. Each class maps onto a CLI exit code."""


class CountFAError(Exception):
    exit_code = 1


class DataError(CountFAError, ValueError):
    """Input data violates the count-data contract."""

    exit_code = 2


class ConfigError(CountFAError, ValueError):
    exit_code = 3


class StructureError(ConfigError):
    """Inconsistent partition, group index or parameter shape."""


class DomainError(ConfigError):
    """Distribution parameter outside its admissible range."""


class NumericError(CountFAError, ArithmeticError):
    exit_code = 4
