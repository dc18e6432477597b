from typing import Any, List, Optional


class CncScsgError(Exception):
    """Base class for every error raised by the package."""


class DimensionError(CncScsgError, ValueError):
    """Bad shapes, sizes or indices."""


class OracleError(CncScsgError, ValueError):
    """Non-finite input to, or output from, a problem oracle."""


class ConfigError(CncScsgError, ValueError):
    """Configuration could not be parsed, or theory inputs fall outside the admissible box."""

    def __init__(self, message: str, violations: Optional[List[Any]] = None):
        super().__init__(message)
        self.violations = list(violations or [])


class DivergenceError(CncScsgError, RuntimeError):
    """Iterate left the finite region; carries the last finite state."""

    def __init__(self, message: str, state: Any = None, epoch: Optional[int] = None):
        super().__init__(message)
        self.state = state
        self.epoch = epoch


class ExperimentError(CncScsgError, RuntimeError):
    """Wraps a failure inside a run together with the epoch it happened at."""

    def __init__(self, message: str, epoch: Optional[int] = None):
        super().__init__(message)
        self.epoch = epoch
