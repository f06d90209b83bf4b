"""Exception types shared across the package."""


class ValidationError(ValueError):
    """Input failed a shape, range or schema check."""


class NumericalError(ArithmeticError):
    """A computation became singular, non-finite or diverged."""
