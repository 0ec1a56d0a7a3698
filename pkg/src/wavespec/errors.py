"""Exception hierarchy shared by all wavespec modules."""


class WavespecError(Exception):
    """Base class for every error raised by this package."""


class DomainError(WavespecError, ValueError):
    """An argument lies outside the domain of the operation."""


class ValidationError(WavespecError, ValueError):
    """A configuration or data object violates its invariants."""


class RegimeError(ValidationError):
    """Sample size, scale and dimension do not satisfy the A4 growth relations."""


class SynthesisError(WavespecError):
    """Circulant embedding failed (an eigenvalue is too negative)."""

    def __init__(self, message, worst_eigenvalue=None):
        super().__init__(message)
        self.worst_eigenvalue = worst_eigenvalue


class InsufficientSampleError(WavespecError):
    """Requested octave has no coefficient free of border effects."""

    def __init__(self, message, octave=None):
        super().__init__(message)
        self.octave = octave


class QuadratureError(WavespecError):
    """Numerical integration did not reach the requested accuracy."""


class RankError(WavespecError):
    """A covariance matrix expected to be positive definite is not."""


class SolverError(WavespecError):
    """The symmetric eigensolver did not converge."""


class DegenerateSpectrumError(WavespecError):
    """A wavelet random matrix has a non-positive eigenvalue."""

    def __init__(self, message, rank=None):
        super().__init__(message)
        self.rank = rank
