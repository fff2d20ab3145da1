"""Exception types raised across the package."""


class InvalidArgument(ValueError):
    pass


class NumericFailure(ArithmeticError):
    """A computation produced a non-finite value or hit a zero denominator."""


class CapacityError(RuntimeError):
    """A configured size limit (table entries, enumeration size) was exceeded."""


class ConfigError(ValueError):
    pass
