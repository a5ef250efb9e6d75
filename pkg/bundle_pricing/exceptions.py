"""Exceptions for the bundle pricing toolkit."""

from typing import Any, Optional


class BundlePricingError(Exception):
    """Base exception for bundle pricing errors."""

    def __init__(self, message: str, details: Any = None) -> None:
        """Initialize the exception."""
        super().__init__(message)
        self.details = details


class InstanceError(BundlePricingError):
    """Malformed instance, unknown id or invalid parameter."""

    pass


class InstanceValidationError(InstanceError):
    """Instance failed validation; details holds the validation report."""

    pass


class UnsupportedTopologyError(BundlePricingError):
    """Operation is not defined for the instance topology."""

    pass


class LpNumericalError(BundlePricingError):
    """The simplex solver failed to reach an optimal basis."""

    def __init__(self, message: str, status: str = "numerical-failure", details: Any = None) -> None:
        """Initialize the exception."""
        super().__init__(message, details)
        self.status = status


class BudgetExceededError(BundlePricingError):
    """An enumeration or search would exceed its configured budget."""

    def __init__(self, message: str, limit: int, requested: int) -> None:
        """Initialize the exception."""
        super().__init__(message, {"limit": limit, "requested": requested})
        self.limit = limit
        self.requested = requested


class AllocationError(BundlePricingError):
    """A constructed allocation violates its own invariants."""

    pass


class PipelineStageError(BundlePricingError):
    """A benchmark pipeline stage failed."""

    def __init__(self, stage: str, cause: Optional[BaseException] = None) -> None:
        """Initialize the exception."""
        super().__init__(f"Pipeline stage '{stage}' failed: {cause}", cause)
        self.stage = stage
        self.cause = cause
