"""Exception hierarchy for parmor."""

import numpy as np


class ParmorError(Exception):
    """Base class for all library errors."""


class ConfigInvalid(ParmorError, ValueError):
    """An experiment configuration failed validation.

    ``path`` holds the dotted location of the offending field.
    """

    def __init__(self, message, path=""):
        self.path = path
        super().__init__(f"{path}: {message}" if path else message)


class DimensionMismatch(ParmorError, ValueError):
    pass


class ParameterOutOfRange(ParmorError, ValueError):
    pass


class NumericalFailure(ParmorError, np.linalg.LinAlgError):
    pass


class SpectrumOverlap(NumericalFailure):
    """Two spectra that must be disjoint are closer than the tolerance."""


class SizeLimitExceeded(ParmorError, ValueError):
    pass


class NotHurwitz(NumericalFailure):
    pass


class RankDeficient(NumericalFailure):
    pass


class SingularShift(NumericalFailure):
    """The shift ``s`` is (numerically) an eigenvalue of the state matrix."""


class SingularGram(NumericalFailure):
    pass


class DuplicateFrequency(ParmorError, ValueError):
    pass


class ObservabilityFailure(ParmorError, ValueError):
    """The pair (S, L) is unobservable or (S, omega0) is not excitable."""


class NonAnalyticCoefficient(ParmorError, ValueError):
    pass


class WindowTooShort(ParmorError, ValueError):
    pass


class WindowOutsideTrajectory(ParmorError, ValueError):
    pass


class AliasedSampling(ParmorError, ValueError):
    pass


class NonFiniteState(NumericalFailure):
    pass


class SeriesRangeWarning(UserWarning):
    """A truncated series is evaluated far from its expansion point."""
