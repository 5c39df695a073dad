"""Exception types shared across the package."""


class ShapeError(ValueError):
    """Operands have incompatible or invalid shapes."""


class NumericError(ArithmeticError):
    """A computation produced or received a non-finite value."""


class CapacityError(ValueError):
    """A dense interaction tensor would exceed the configured size cap."""
