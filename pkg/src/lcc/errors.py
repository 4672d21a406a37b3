"""Exception types raised across the package."""


class LccError(Exception):
    """Base class for package errors."""


class BudgetExhausted(LccError):
    """Raised when an evaluation is requested past the FE budget."""


class DimensionMismatch(LccError, ValueError):
    """Input vector length does not match the problem dimension."""


class FactorizationFailure(LccError):
    """Covariance factorization failed even after the jitter retry."""


class NonFiniteFitness(LccError, ValueError):
    """An offspring fitness is NaN or infinite."""


class IndexOutOfRange(LccError, IndexError):
    """A subgroup index set points outside the full dimension range."""


class ShapeMismatch(LccError, ValueError):
    """Array arguments disagree on shape."""


class NonFiniteVariance(LccError, ValueError):
    """diag(C) contains NaN or infinite entries."""


class EmptyRecord(LccError, ValueError):
    """A subgroup run record holds no generations."""


class SizeMismatch(LccError, ValueError):
    """A state block has the wrong length for the configured m or L."""


class DegenerateDistribution(LccError, ValueError):
    """Action probabilities are NaN or do not sum to ~1."""


class NonFiniteLoss(LccError, ValueError):
    """A training loss evaluated to NaN or infinity."""


class NonFiniteGradient(LccError, ValueError):
    """A gradient array contains NaN or infinity."""


class ConfigMismatch(LccError, ValueError):
    """Checkpoint structure is incompatible with the active config."""


class ConfigError(LccError, ValueError):
    """Config file is malformed, has unknown keys, or violates a constraint."""


class CheckpointIoError(LccError, OSError):
    """Checkpoint file could not be read or written."""


class VersionMismatch(LccError):
    """Checkpoint format version is not supported."""


class ChecksumMismatch(LccError):
    """Checkpoint bytes fail the trailing checksum."""
