"""Exception hierarchy shared across the toolkit."""


class ContactcxError(Exception):
    """Base class for all toolkit errors."""


class ExprSyntaxError(ContactcxError):
    """Raised by the parser; carries the 0-based offset of the bad token."""

    def __init__(self, message, position):
        super().__init__(f"{message} at position {position}")
        self.position = position


class UndeclaredVariableError(ContactcxError):
    def __init__(self, name, position=None):
        at = f" at position {position}" if position is not None else ""
        super().__init__(f"undeclared variable '{name}'{at}")
        self.name = name
        self.position = position


class DomainError(ContactcxError):
    """Evaluation hit a singular point (log of non-positive, division by zero, ...).

    ``subexpr`` is the serialized offending subexpression.
    """

    def __init__(self, message, subexpr=None):
        if subexpr is not None:
            message = f"{message} in '{subexpr}'"
        super().__init__(message)
        self.subexpr = subexpr


class ChartDomainError(ContactcxError):
    """A point left every chart domain it could be represented in."""


class ConvergenceError(ContactcxError):
    """Newton projection or a sweep failed to converge within its budget."""


class DimensionError(ContactcxError):
    """Operation received objects of incompatible dimensions."""


class ScenarioError(ContactcxError):
    """Scenario file/dict failed validation; message carries the field path."""

    def __init__(self, message, path=None):
        if path:
            message = f"{path}: {message}"
        super().__init__(message)
        self.path = path


class UnsupportedStructureError(ContactcxError):
    """Group/stratification shape outside what the toolkit models."""
