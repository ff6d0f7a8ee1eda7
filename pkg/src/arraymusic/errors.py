"""Exception types shared across the package."""


class ArrayMusicError(Exception):
    """Base class for all library errors."""


class ConfigError(ArrayMusicError):
    """Invalid experiment configuration; message carries section/field."""


class CoincidentPointsError(ArrayMusicError):
    """Green's function requested at zero source-observer distance."""


class DimensionMismatchError(ArrayMusicError):
    pass


class ZeroSignalError(ArrayMusicError):
    """Noise level is undefined for an all-zero signal."""


class ZeroMatrixError(ArrayMusicError):
    """Subspace decomposition of an all-zero matrix."""


class ScattererOutsideWindowError(ArrayMusicError):
    """Scatterer does not map to any grid cell of the imaging window."""


class TwoScatterersOneCellError(ArrayMusicError):
    """Two scatterers map to the same grid index; support would be ambiguous."""


class NotEquispacedError(ArrayMusicError):
    """Wavenumbers are not equally spaced (required for Toeplitz stacking)."""


class OddFrequencyCountError(ArrayMusicError):
    """Toeplitz stacking needs an odd number of frequencies (S = 2*aleph - 1)."""


class RankDeficientError(ArrayMusicError):
    """Support-restricted system too ill-conditioned to solve."""


class EmptySupportError(ArrayMusicError):
    pass


class MissingAuxiliaryError(ArrayMusicError):
    """An intensity record required by the polarization identity is absent."""


class ReferenceVanishesError(ArrayMusicError):
    """Reference field amplitude below floor at some receiver.

    Carries the receiver index so callers may switch reference column.
    """

    def __init__(self, receiver: int, message: str = ""):
        self.receiver = receiver
        super().__init__(message or f"reference amplitude vanishes at receiver {receiver}")


class HypothesisViolatedError(ArrayMusicError):
    """A hypothesis of the noise-robustness bound does not hold."""

    def __init__(self, which: str):
        self.which = which
        super().__init__(f"bound hypothesis violated: {which}")
