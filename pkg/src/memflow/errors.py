"""Exception hierarchy shared across the package."""

from __future__ import annotations


class MemflowError(ValueError):
    """Base class for all library errors."""


class SmoothnessError(MemflowError):
    """A derivative order exceeds the kernel's smoothness order."""


class GridMismatchError(MemflowError):
    """Two grid functions live on different grids."""


class EnvelopeError(MemflowError):
    """A query point lies outside the region an evaluator was built for."""


class CapError(MemflowError):
    """A configured cap (truncation order, derivative order, memory) is exceeded."""


class ConsistencyError(MemflowError):
    """Two routes that must agree do not."""


class KernelParseError(MemflowError):
    """Malformed kernel specification string."""

    def __init__(self, message: str, text: str, column: int, line: int = 1):
        self.text = text
        self.column = column
        self.line = line
        super().__init__(f"line {line}, column {column}: {message}")
