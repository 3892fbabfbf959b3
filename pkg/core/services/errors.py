"""
errors.py — Exception types shared by every service.

Input problems are ValueError subclasses so callers that only know about
ValueError keep working. Internal inconsistencies (an obstruction that should
vanish but does not, a verified identity failing after a solve) are
RuntimeError subclasses. The pipeline maps both families onto exit codes.
"""

from __future__ import annotations


class InstanceError(ValueError):
    """Schema violation or dangling reference in an instance document."""


class WindowOverflowError(ValueError):
    """A t-power left the declared Laurent window."""


class TruncationMismatchError(ValueError):
    """Operands carry different truncation orders or coefficient rings."""


class IncompatibleDataError(ValueError):
    """Boundary, face or degree data that cannot fit together."""


class NotNilpotentError(ValueError):
    """An exponential series was applied to an element that is not in the maximal ideal."""


class InconsistencyError(RuntimeError):
    """A solve produced something that fails its own verification."""


class CheckFailure(Exception):
    """A report-level check failed; carries the report that failed."""

    def __init__(self, message: str, report=None):
        super().__init__(message)
        self.report = report


class StageDependencyError(ValueError):
    """A pipeline stage was requested without the stages it consumes."""
