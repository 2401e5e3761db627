"""Exception hierarchy shared across the package."""


class PancError(Exception):
    """Base class for all package errors."""


class FormatError(PancError):
    """Malformed token-grid or bank file (bad magic, truncation, bad values)."""


class DegenerateVectorError(PancError):
    """A vector that cannot be normalized (zero or near-zero norm)."""

    def __init__(self, row: int, norm: float):
        self.row = row
        self.norm = norm
        super().__init__(f"row {row} has degenerate norm {norm:.3e}")


class MissingLabelError(PancError):
    """An operation requiring both labels found one side empty."""


class IsolatedVertexError(PancError):
    """A graph vertex with zero degree; the normalized Laplacian is undefined."""

    def __init__(self, vertex: int):
        self.vertex = vertex
        super().__init__(f"vertex {vertex} has zero degree")


class ConvergenceError(PancError):
    """Eigensolver failed to reach the requested residual."""

    def __init__(self, message: str, history: list[float]):
        self.history = history
        super().__init__(message)


class PipelineError(PancError):
    """A pipeline stage failed; wraps the original error with its stage name."""

    def __init__(self, stage: str, cause: Exception):
        self.stage = stage
        self.cause = cause
        super().__init__(f"[{stage}] {type(cause).__name__}: {cause}")
