"""Exception types shared across the package."""


class NavaugError(Exception):
    """Base class for all package-specific errors."""


class DegenerateGeometryError(NavaugError, ValueError):
    """Raised when no full comparison window fits in the valid region."""


class ClipRejectedError(NavaugError):
    """Raised when a clip cannot yield at least two sampled frames."""


class GenerationFailedError(NavaugError):
    """Raised when no usable template/object combination exists for a segment."""


class MissingTemplateError(NavaugError, KeyError):
    """Raised when a template bank has no templates for a requested category."""

    def __init__(self, category: str):
        super().__init__(category)
        self.category = category

    def __str__(self) -> str:
        return f"template bank has no templates for category {self.category!r}"


class UnshuffleableError(NavaugError):
    """Raised when a frame sequence admits no order-changing permutation."""


class InvalidTrajectoryError(NavaugError, ValueError):
    """Raised when consecutive trajectory nodes are not adjacent in the graph."""


class UnreachableGoalError(NavaugError):
    """Raised when the goal is disconnected from the final trajectory node."""


class ParseError(NavaugError, ValueError):
    """Raised on malformed input files; carries the offending line number."""

    def __init__(self, path: str, line_no: int, message: str):
        super().__init__(f"{path}:{line_no}: {message}")
        self.path = path
        self.line_no = line_no
