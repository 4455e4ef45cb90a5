"""Exception types shared across the package."""


class DomainError(ValueError):
    """Invalid argument or point outside the operator's domain of validity."""


class ParseError(ValueError):
    """Malformed domain or configuration text; carries a position hint."""

    def __init__(self, message, position=None):
        super().__init__(message if position is None else f"{message} (at position {position})")
        self.position = position


class ComputationError(RuntimeError):
    """A computation could not be completed (non-coercive form, k too large, ...)."""
