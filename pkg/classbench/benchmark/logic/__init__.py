from typing import Any


class ClassbenchError(Exception):
    """Base class for everything the benchmark logic raises on purpose."""


class DatasetParseError(ClassbenchError):
    """A dataset file could not be read. Always points at the offending line."""

    def __init__(self, line: int, message: str):
        self.line = line
        self.message = message
        super().__init__(f"line {line}: {message}")


class DatasetError(ClassbenchError):
    pass


class ConfigurationError(ClassbenchError):
    pass


class TrainingError(ClassbenchError):
    pass


class MetricError(ClassbenchError):
    pass


class ImputationError(ClassbenchError):
    pass


class EmConvergenceError(ImputationError):
    """EM ran out of iterations. The last estimate is kept so a caller can still inspect or use it."""

    def __init__(self, message: str, state: Any = None, iterations: int = 0):
        self.state = state
        self.iterations = iterations
        super().__init__(message)
