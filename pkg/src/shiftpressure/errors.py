"""Exception types shared across the package."""


class ShiftPressureError(Exception):
    pass


class DimensionMismatch(ShiftPressureError, ValueError):
    pass


class ParseError(ShiftPressureError, ValueError):
    def __init__(self, message: str, line: int | None = None):
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)
        self.line = line


class ResourceLimit(ShiftPressureError):
    """Raised before (or instead of) a computation that would exceed a budget.

    ``projected`` carries the cost estimate that tripped the limit, when known.
    """

    def __init__(self, message: str, projected: int | None = None):
        super().__init__(message)
        self.projected = projected


class LanguageUndecided(ShiftPressureError):
    def __init__(self, message: str, level: int | None = None):
        super().__init__(message)
        self.level = level


class EmptySubshift(ShiftPressureError):
    """No admissible pattern exists on the requested shape (pressure is -inf)."""


class PrecisionExhausted(ShiftPressureError):
    pass
