"""Exception hierarchy shared by every module."""


class CointossError(ValueError):
    """Base class for all errors raised by this package."""


class InvalidWeightSpec(CointossError):
    """Weight DSL text is malformed or names an illegal parameter."""


class RangeViolation(CointossError):
    """A value falls outside the admissible range of an operation."""


class PreconditionViolation(CointossError):
    """An operation was called with inputs that break its precondition."""


class PrecisionExhausted(CointossError):
    """Not even one digit can be certified from the available precision."""
