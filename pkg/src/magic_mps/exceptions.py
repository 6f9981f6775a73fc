from __future__ import annotations

from typing import Any

EXIT_CONFIG_ERROR = 2
EXIT_NUMERICAL_ABORT = 3
EXIT_NOT_CONVERGED = 4


class MagicMpsError(Exception):
    exit_code = 1

    def __init__(self, message: str, **details: Any) -> None:
        super().__init__(message)
        self.details = details

    def to_payload(self) -> dict[str, Any]:
        return {
            "error": self.__class__.__name__,
            "message": str(self),
            "exit_code": self.exit_code,
            **self.details,
        }


class ConfigurationError(MagicMpsError, ValueError):
    exit_code = EXIT_CONFIG_ERROR


class NumericalAbort(MagicMpsError):
    exit_code = EXIT_NUMERICAL_ABORT


class NotNormalizedError(NumericalAbort, ValueError):
    pass


class TruncationAbort(NumericalAbort):
    pass


class NonPositiveContraction(NumericalAbort):
    pass


class GroupStructureError(NumericalAbort):
    pass


class ConvergenceError(MagicMpsError):
    exit_code = EXIT_NOT_CONVERGED

    def __init__(self, message: str, partial: Any = None, **details: Any) -> None:
        super().__init__(message, **details)
        self.partial = partial
