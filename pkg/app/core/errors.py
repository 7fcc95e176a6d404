# app/core/errors.py
from typing import List, Optional


class HHGError(Exception):
    """Base class for every failure raised by this package."""


class ConfigurationError(HHGError, ValueError):
    pass


class ArgumentError(HHGError, ValueError):
    pass


class NumericalError(HHGError):
    def __init__(self, message: str, condition_number: Optional[float] = None):
        super().__init__(message)
        self.condition_number = condition_number


class PropagationError(NumericalError):
    def __init__(self, message: str, step: int):
        super().__init__(message)
        self.step = step


class UnsupportedStateError(HHGError):
    pass


class CapabilityError(HHGError):
    pass


class IntegratorError(NumericalError):
    pass


class TruncationError(NumericalError):
    pass


class ConvergenceError(NumericalError):
    def __init__(self, message: str, drift: float):
        super().__init__(message)
        self.drift = drift


class QuadratureExtentError(NumericalError):
    pass


class UndefinedG2Error(NumericalError):
    pass


class InstabilityError(NumericalError):
    pass


class CacheFormatError(HHGError):
    pass


class StageError(HHGError):
    """
    Raised by the pipeline when a stage fails.
    `completed` lists the stages whose outputs are already cached.
    """

    def __init__(self, stage: str, cause: BaseException, completed: Optional[List[str]] = None):
        super().__init__(f"stage '{stage}' failed: {cause}")
        self.stage = stage
        self.cause = cause
        self.completed = list(completed or [])


class NumericalInstabilityWarning(RuntimeWarning):
    pass
