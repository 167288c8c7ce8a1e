"""Exception hierarchy shared by every kbeta module."""

from __future__ import annotations


class KBetaError(Exception):
    """Base class for all library errors."""


class NonConvexInput(KBetaError):
    """A profile handed to the Legendre transform is not discretely convex."""


class GridMismatch(KBetaError):
    """Two objects that must share a grid live on different grids."""


class NonFinite(KBetaError):
    """A sample or an intermediate quantity is NaN or infinite."""


class NewtonDiverged(KBetaError):
    """The quantization Newton iteration failed to reach tolerance."""


class InadmissibleInput(KBetaError):
    """A potential violates the positivity or moment-range constraint."""


class LegendreFailure(KBetaError):
    """A conjugate could not be represented on the requested grid."""


class SlopeUnstable(KBetaError):
    """A tail fit has residuals above the configured bound."""

    def __init__(self, message: str, estimate=None):
        super().__init__(message)
        self.estimate = estimate


class EmptyData(KBetaError):
    """Exact-arithmetic input with no components."""


class ZeroVolume(KBetaError):
    """Intersection data with nonpositive volume."""


class NonConvex(KBetaError):
    """Piecewise-linear data whose slopes are not increasing."""


class ConfigInvalid(KBetaError):
    """An experiment configuration fails validation."""


class NumericalFailure(KBetaError):
    """A numerical step failed inside an experiment run."""
