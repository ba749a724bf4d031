"""Exception types shared across the package."""

from __future__ import annotations


class DomainError(ValueError):
    """An argument lies outside the mathematical domain of the operation."""


class NonConvergence(RuntimeError):
    """Power series hit the hard term cap before the tail bound was met.

    Signals that the argument is too large for series mode; the caller
    should be using the large-argument branch instead.
    """

    def __init__(self, message: str, terms: int):
        super().__init__(message)
        self.terms = terms


class ResolutionError(ValueError):
    """A spatial grid is too coarse to resolve the requested mode count."""


class NoConvergence(RuntimeError):
    """Picard iteration did not reach tolerance within the sweep budget.

    Carries the successive-difference sequence so callers can inspect
    how (or whether) the iteration was contracting.
    """

    def __init__(self, message: str, iterations: int, diffs):
        super().__init__(message)
        self.iterations = iterations
        self.diffs = list(diffs)
