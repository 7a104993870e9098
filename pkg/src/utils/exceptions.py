"""
Error hierarchy for the lab.
Every error is also a ValueError so plain callers can catch it generically.
"""

from typing import Optional


class CorelError(ValueError):
    """Base class for all lab errors"""


class ContractViolation(CorelError):
    """A precondition or shape contract was broken"""


class ConfigError(CorelError):
    """Invalid run or loss configuration"""


class IdxFormatError(CorelError):
    """Malformed IDX file"""

    def __init__(self, message: str, offset: int, path: Optional[str] = None):
        self.offset = offset
        self.path = path
        where = f"{path}: " if path else ""
        super().__init__(f"{where}{message} (at byte offset {offset})")


class CsvParseError(CorelError):
    """Malformed CSV input"""

    def __init__(self, message: str, line: int, path: Optional[str] = None):
        self.line = line
        self.path = path
        where = f"{path}:" if path else "line "
        super().__init__(f"{where}{line}: {message}")


class NonFiniteGradientError(CorelError):
    """NaN or Inf reached the optimizer"""


class DivergenceError(CorelError):
    """Training loss became non-finite"""
