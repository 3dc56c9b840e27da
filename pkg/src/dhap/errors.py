"""Exception types raised across the package."""


class DhapError(Exception):
    """Base class for all package errors."""


class GridError(DhapError):
    pass


class TopScale(GridError):
    """Requested the parent of a top-scale interval."""


class BottomScale(GridError):
    """Requested children (or a mother wavelet) at the finest scale."""


class NonConvexTree(DhapError):
    pass


class DisjointnessViolation(DhapError):
    pass


class HypothesisFail(DhapError):
    """An input does not satisfy the hypothesis a check relies on."""

    def __init__(self, message, witness=None):
        super().__init__(message)
        self.witness = witness


class SizeHypothesisFail(HypothesisFail):
    pass


class MeanHypothesisFail(HypothesisFail):
    pass


class NotMeanZero(DhapError):
    pass


class ExponentRange(DhapError):
    pass


class WitnessInvalid(DhapError):
    pass


class PackingViolation(DhapError):
    pass


class NotAdmissible(DhapError):
    pass


class TruncationViolation(DhapError):
    pass


class AccretivityFail(DhapError):
    pass


class ParaAccretivityFail(AccretivityFail):
    pass


class ScaleViolation(DhapError):
    pass


class DegenerateAverage(DhapError):
    pass


class SystemInvalid(DhapError):
    """An accretive system breaks its normalization or is malformed."""


class NormalizationFail(SystemInvalid):
    pass


class FormatError(DhapError):
    """Malformed JSON input."""


class ConfigInvalid(DhapError):
    """Run configuration outside its allowed range."""
