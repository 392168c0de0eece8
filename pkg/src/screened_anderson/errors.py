"""Exception types shared across the package."""


class ValidationError(ValueError):
    """Inputs violate a documented precondition or parameter constraint."""


class NumericalError(RuntimeError):
    """A numerical routine could not certify its result."""


class ResonanceError(NumericalError):
    """An energy sits (numerically) on the spectrum of the operator."""
