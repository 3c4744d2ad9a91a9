class DomainError(ValueError):
    """Input outside an operation's mathematical domain."""


class NumericalError(ArithmeticError):
    """Computation failed numerically: ill conditioning, exhausted
    precision window, or a non convergent iteration."""
