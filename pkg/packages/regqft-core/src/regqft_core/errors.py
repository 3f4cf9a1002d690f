from __future__ import annotations

import math
from typing import TYPE_CHECKING, Any

if TYPE_CHECKING:
    from .quadrature import IntegrationResult


class RegQFTError(Exception):
    """Base class for every error raised by the engine"""


class BadBoxError(RegQFTError, ValueError):
    """An integration interval is empty, reversed or infinite"""


class BudgetExceededError(RegQFTError, RuntimeError):
    """A request exceeds a configured cap (dimension, factor count, order)"""


class NonConvergenceError(RegQFTError, RuntimeError):
    def __init__(self, message: str, result: IntegrationResult) -> None:
        super().__init__(message)
        self.result = result


class CoincidenceDivergenceError(RegQFTError, ValueError):
    """The unregularized kernel was requested where it diverges"""


class LightconeSingularityError(RegQFTError, ValueError):
    pass


class NegativeSmearingError(RegQFTError, ValueError):
    pass


class ExponentViolationError(RegQFTError, ValueError):
    pass


class SingularWavefunctionError(RegQFTError, ValueError):
    """1 + dZ vanishes, so the tilde constants are undefined"""


class OutOfRangeError(RegQFTError, ValueError):
    pass


class CalibrationFailureError(RegQFTError, RuntimeError):
    def __init__(self, message: str, report: Any) -> None:
        super().__init__(message)
        self.report = report


class DivergentGasError(RegQFTError, ArithmeticError):
    """E = 0: no finite radius bound; `radius` holds the inf sentinel"""

    def __init__(self, message: str) -> None:
        super().__init__(message)
        self.radius = math.inf
