"""Exception types shared across the library.

Every error raised by textcurv derives from :class:`TextcurvError`, so
callers can catch one base class. The CLI maps these onto exit codes
(validation -> 2, convergence -> 3, I/O -> 4).
"""

from __future__ import annotations


class TextcurvError(Exception):
    """Base class for all library errors."""


class InvalidInput(TextcurvError):
    """An argument violates a documented precondition."""


class MassOverflow(TextcurvError):
    """Raw probabilities sum to more than 1 beyond tolerance."""


class DivergenceInfinite(TextcurvError):
    """KL divergence is infinite (absolute continuity violated)."""


class DegenerateReference(TextcurvError):
    """A reference/base distribution has a zero entry where one is forbidden."""


class MissingEmbedding(TextcurvError):
    """A candidate state has no embedding vector."""


class ConvergenceFailure(TextcurvError):
    """Iterative scaling did not reach the requested tolerance."""

    def __init__(self, message: str, residual: float, iterations: int):
        super().__init__(message)
        self.residual = residual
        self.iterations = iterations


class SchemaError(TextcurvError):
    """A file does not match a recognized schema version."""


class ValidationError(TextcurvError):
    """A loaded object violates a structural invariant."""

    def __init__(self, message: str, slot_id: str | None = None, path: str | None = None):
        detail = message
        if slot_id is not None:
            detail = f"slot {slot_id!r}: {detail}"
        if path is not None:
            detail = f"{detail} (at {path})"
        super().__init__(detail)
        self.slot_id = slot_id
        self.path = path


class ExtractionError(TextcurvError):
    """A belief extractor failed to produce usable output."""
