# core/errors.py
# Exception hierarchy shared by quantum/ and cli/.

from typing import Optional


class SatrepError(Exception):
    """Root of every error raised by this package."""


class ConfigError(SatrepError, ValueError):
    pass


# ===== linear algebra =====

class DimMismatchError(SatrepError, ValueError):
    pass


class NonHermitianError(SatrepError, ValueError):
    pass


class NotPSDError(SatrepError, ValueError):
    pass


class NoConvergenceError(SatrepError, ArithmeticError):
    pass


# ===== observables & instruments =====

class NotEffectError(SatrepError, ValueError):
    pass


class InvalidStateError(SatrepError, ValueError):
    pass


class PartialMapError(SatrepError, KeyError):
    pass


class LabelMismatchError(SatrepError, ValueError):
    pass


class NotStochasticError(SatrepError, ValueError):
    pass


class UnknownOutcomeError(SatrepError, KeyError):
    pass


class BadDimensionError(SatrepError, ValueError):
    pass


class ObservableMismatchError(SatrepError, ValueError):
    pass


class CapExceededError(SatrepError, RuntimeError):
    """Outcome enumeration would exceed the configured cap."""

    def __init__(self, required: int, cap: int) -> None:
        super().__init__(f"enumeration needs {required} outcomes, cap is {cap}")
        self.required = required
        self.cap = cap


# ===== preorder =====

class LPNumericalFailure(SatrepError, ArithmeticError):
    pass


# ===== asymptotics =====

class NotNormalizedError(SatrepError, ValueError):
    pass


class OutOfRangeError(SatrepError, ValueError):
    pass


class NonBinaryLabelsError(SatrepError, ValueError):
    pass


class AtomsTooCloseError(SatrepError, ValueError):
    pass


class NonFiniteError(SatrepError, ValueError):
    pass


class NumericalUnderflow(RuntimeWarning):
    """State trace fell below the underflow threshold and was renormalized."""


# ===== cli =====

class ProblemParseError(SatrepError, ValueError):
    """Problem file could not be turned into domain objects.

    `position` is a JSON-pointer-like path inside the file (e.g. "/instrument/kraus/1/0"),
    or "line:col" for JSON syntax errors.
    """

    def __init__(self, message: str, path: Optional[str] = None, position: Optional[str] = None) -> None:
        where = ""
        if path:
            where += f"{path}"
        if position:
            where += f" at {position}"
        super().__init__(f"{where}: {message}" if where else message)
        self.path = path
        self.position = position
        self.detail = message
