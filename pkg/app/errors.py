from typing import Optional


class SchedulingError(Exception):
    """Base class for every error raised by the scheduler package."""


class GraphError(SchedulingError, ValueError):
    pass


class DisconnectedGraph(GraphError):
    pass


class InvalidWeight(GraphError):
    pass


class DuplicateEdge(GraphError):
    pass


class InvalidEdge(GraphError):
    """Endpoint out of range or self-loop."""


class GenerationFailed(SchedulingError, RuntimeError):
    pass


class InvariantViolation(SchedulingError, RuntimeError):
    pass


class NoParent(SchedulingError, LookupError):
    pass


class TooLarge(SchedulingError, ValueError):
    pass


class InvalidSchedule(SchedulingError, ValueError):
    def __init__(self, message: str, violations: Optional[list] = None):
        super().__init__(message)
        self.violations = violations or []


class ParseError(SchedulingError, ValueError):
    """Scenario document could not be read; carries the line or field that failed."""

    def __init__(self, message: str, line: Optional[int] = None, field: Optional[str] = None):
        location = []
        if line is not None:
            location.append(f"line {line}")
        if field is not None:
            location.append(f"field '{field}'")
        super().__init__(f"{message} ({', '.join(location)})" if location else message)
        self.line = line
        self.field = field


class ValidationError(SchedulingError, ValueError):
    pass
