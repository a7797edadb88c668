"""Exception types shared across the package."""


class PulsekitError(Exception):
    """Base class for every error this package raises on purpose."""


class FormatError(PulsekitError):
    """Malformed file content; the message names the offending field or byte offset."""


class UnsupportedDatatypeError(FormatError):
    """File uses a datatype code outside the supported subset."""


class TruncationError(FormatError):
    """File ends before the declared payload does."""


class ValidationError(PulsekitError):
    """A value violates a documented invariant."""


class DomainError(PulsekitError):
    """Input lies outside the mathematical domain of an operation."""


class DegenerateDataError(PulsekitError):
    """Data carries no usable signal (zero spread, zero mean, all-zero)."""


class DegenerateIntensityError(DegenerateDataError):
    """Intensity data degenerate, e.g. all in-mask values zero."""


class EstimationError(PulsekitError):
    """Statistical estimation failed to produce a usable result."""


class InsufficientDataError(EstimationError):
    """Too few samples to attempt the fit."""


class DegenerateFitError(EstimationError):
    """Fit collapsed: zero spread input or vanished mixture component."""


class AmbiguousAssignmentError(EstimationError):
    """Fitted component means too close to map onto distinct tissues."""


class ConditioningError(PulsekitError):
    """Linear system singular or too ill-conditioned to trust."""


class FitError(PulsekitError):
    """Least-squares fit has singular normal equations."""


class UsageError(PulsekitError):
    """Operation called with arguments that violate its preconditions."""


class CoverageError(UsageError):
    """Requested schedule cannot cover every grid point at least once."""


class BoundsError(UsageError):
    """Patch or index extends outside the volume."""
