"""Exception types shared across the package."""


class WalkembedError(Exception):
    """Base class for all package errors."""


class ValidationError(WalkembedError):
    """Bad configuration or precondition violation; maps to CLI exit code 1."""


class ParseError(ValidationError):
    """Malformed input file; carries the offending line number."""

    def __init__(self, path, line_no: int, message: str):
        self.path = str(path)
        self.line_no = line_no
        super().__init__(f"{path}:{line_no}: {message}")


class EmptyGraphError(ValidationError):
    """An operation produced or received a graph with no nodes."""


class CapacityError(ValidationError):
    """Requested generation would exceed the configured memory budget."""


class MetricError(WalkembedError):
    """A metric is undefined for the given inputs (e.g. no edges)."""


class NumericError(WalkembedError):
    """Training produced a non-finite value."""


class StageError(WalkembedError):
    """A pipeline stage failed; names the stage and chains the cause."""

    def __init__(self, stage: str, cause: BaseException):
        self.stage = stage
        super().__init__(f"stage {stage!r} failed: {cause}")
