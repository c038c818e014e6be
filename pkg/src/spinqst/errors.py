"""Exception types raised across the package."""


class ValidationError(ValueError):
    """Invalid chain, configuration or argument."""


class NumericalError(ArithmeticError):
    """An eigensolver or propagator failed to produce a usable result."""


class CapacityError(MemoryError):
    """Requested full-space object exceeds the configured size guard."""
