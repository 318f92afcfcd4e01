"""Exception types shared across the package."""


class EdgeListParseError(ValueError):
    """Malformed line in an edge-list file. Carries the 1-based line number."""

    def __init__(self, line_no, message):
        super().__init__(f"line {line_no}: {message}")
        self.line_no = line_no


class EmptyGraphError(ValueError):
    """Input decoded to a graph with no nodes."""


class LabelFileError(ValueError):
    """Malformed or inconsistent labels file."""

    def __init__(self, message, line_no=None):
        if line_no is not None:
            message = f"line {line_no}: {message}"
        super().__init__(message)
        self.line_no = line_no


class ZeroNormError(ValueError):
    """A vector that must be unit-normalized has zero norm."""


class TrainingError(RuntimeError):
    """Training produced a non-finite loss or gradient."""


class CheckpointError(RuntimeError):
    """Checkpoint file is unreadable, truncated, or version-incompatible."""
