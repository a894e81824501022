"""Exception hierarchy for the engine.

Every error derives from EngineError and from the closest builtin, so callers
catching ValueError or RuntimeError keep working.
"""
from typing import Optional, Sequence


class EngineError(Exception):
    """Base class for all engine errors."""


class ParseError(EngineError, ValueError):
    """Syntax error in function DSL text."""

    def __init__(self, message: str, position: Optional[int] = None):
        self.position = position
        if position is not None:
            message = f"{message} at position {position}"
        super().__init__(message)


class DimensionError(EngineError, ValueError):
    pass


class InvalidAtomError(EngineError, ValueError):
    pass


class DomainError(EngineError, ValueError):
    pass


class PreconditionError(EngineError, ValueError):
    pass


class TupleValidationError(EngineError, ValueError):
    """Operator tuple rejected; `violations` lists every failed check."""

    def __init__(self, violations: Sequence[str]):
        self.violations = list(violations)
        super().__init__("; ".join(self.violations))


class NotDiagonalizableError(EngineError, ValueError):
    pass


class UnsupportedAtomError(EngineError, ValueError):
    pass


class QuadratureError(EngineError, RuntimeError):
    pass


class IntegrabilityError(EngineError, RuntimeError):
    pass
