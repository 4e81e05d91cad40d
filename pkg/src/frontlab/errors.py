"""Exception hierarchy shared by all frontlab modules."""


class FrontLabError(Exception):
    """Base class for all frontlab errors."""


class ParameterRangeError(FrontLabError):
    """A tail-profile or reaction parameter is outside its valid range."""


class DivergentTailError(FrontLabError):
    """The radial tail integral of a profile diverges for the requested dimension."""


class InvalidGridError(FrontLabError):
    """Grid construction parameters are invalid (size not a power of two, etc.)."""


class GridMismatchError(FrontLabError):
    """Two fields that must share a grid do not."""


class DirectSumTooLargeError(FrontLabError):
    """The direct-sum convolution oracle was asked for a grid beyond its cost guard."""


class TubeViolationError(FrontLabError):
    """Field values left the invariant interval [0, theta] beyond tolerance."""


class StepSizeError(FrontLabError):
    """Requested time step exceeds the stability bound."""


class TruncationBoundError(FrontLabError):
    """Truncation bound of the linear series exceeds the requested tolerance."""


class DomainCapError(FrontLabError):
    """Adaptive domain expansion would exceed the configured cap."""


class LevelRangeError(FrontLabError):
    """Requested level is outside the invertible range of the level-set shape."""


class BranchDomainError(FrontLabError):
    """Argument outside the domain of the negative Lambert-W branch."""


class BelowThresholdError(FrontLabError):
    """Time argument below the validity threshold of a predicted front law."""


class InsufficientDataError(FrontLabError):
    """Not enough trace points to fit growth laws."""


class NoRootError(FrontLabError):
    """The exponent equation of the level-inclusion check has no admissible root."""


class ConfigError(FrontLabError):
    """Experiment configuration is malformed or inconsistent."""
