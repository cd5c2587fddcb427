"""Exception types raised by the estimation pipeline.

All errors derive from :class:`DpcaError` so callers can catch the whole
family.  Errors raised inside :func:`dpca.fit.fit_dpca` additionally carry a
``stage`` attribute naming the pipeline stage that failed.
"""


class DpcaError(Exception):
    """Base class for all errors raised by this package."""

    stage: str | None = None


class DegenerateWindow(DpcaError):
    """No bandwidth up to the domain width yields a solvable local system."""


class RankDeficient(DpcaError):
    """Local 2D design matrix is singular even after bandwidth widening."""


class EmptyCandidates(DpcaError):
    """Bandwidth selection was given an empty candidate list."""


class AllDegenerate(DpcaError):
    """Every bandwidth candidate failed the local window precondition."""


class NoPairs(DpcaError):
    """No subject has two or more observations, so no covariance pairs exist."""


class NotSymmetric(DpcaError):
    """A surface that must be symmetric is not."""


class ZeroEigenvalue(DpcaError):
    """Requested component has an eigenvalue at or below the truncation level."""


class EmptySpectrum(DpcaError):
    """An eigensystem with no retained components was used where one is needed."""


class SingularCovariance(DpcaError):
    """A ridged per-subject observation covariance is too ill-conditioned."""


class DimensionMismatch(DpcaError):
    """Array shapes are inconsistent with the requested computation."""


class TimeOutOfDomain(DpcaError):
    """An observation time lies outside the fitted domain."""


class TooFewPoints(DpcaError):
    """A per-curve method was applied to a curve with too few observations."""


class ZeroDenominator(DpcaError):
    """A relative error was requested against a function with zero energy."""


class SingleClass(DpcaError):
    """Classification training data contains only one class."""


class NonFinite(DpcaError):
    """An iterative fit diverged to non-finite values."""


class UnsupportedOrder(DpcaError):
    """Requested basis order is outside the supported range."""
