"""Exception types shared across the library."""


class LseminkError(Exception):
    """Base class for all library-specific errors."""


class DimensionMismatch(LseminkError, ValueError):
    """Vector or matrix dimensions violate an operator or objective contract."""


class NonFiniteError(LseminkError):
    """Base class for NaN/Inf failures."""


class NonFiniteInput(NonFiniteError, ValueError):
    """An input vector contains NaN or infinite entries."""


class NonFiniteValue(NonFiniteError, FloatingPointError):
    """A computation produced NaN or infinite values."""


class EmptyInput(LseminkError, ValueError):
    """An operation received an empty vector where data is required."""


class ZeroRhs(LseminkError, ValueError):
    """A factorization was requested for a zero right-hand side."""


class StaleCache(LseminkError, RuntimeError):
    """Cached evaluation state does not correspond to the requested point."""


class SingularTridiagonal(LseminkError, RuntimeError):
    """A shifted tridiagonal system is numerically singular; callers should
    retry with a larger shift."""


class InvalidEta(LseminkError, ValueError):
    """The smoothing parameter of a max-smoothing problem must be positive."""


class EmptyDataset(LseminkError, ValueError):
    """A dataset with zero samples cannot define an objective."""


class ScaleLimit(LseminkError, ValueError):
    """Problem size exceeds the limit of a dense reference routine."""


class IdxFormatError(LseminkError, ValueError):
    """Base class for IDX file parsing failures."""


class BadMagic(IdxFormatError):
    """IDX file starts with an unexpected magic number."""


class TruncatedFile(IdxFormatError):
    """IDX file ends before the advertised payload is complete."""


class CountMismatch(IdxFormatError):
    """Image and label files advertise different sample counts."""


class ConfigError(LseminkError, ValueError):
    """Experiment specification is incomplete or inconsistent."""
