"""Exception hierarchy shared by all modules."""


class PrymTauError(Exception):
    """Base class for every error raised by the package."""


class ConfigError(PrymTauError):
    """Invalid user input: malformed spec, unknown field, bad flag."""


class ComputationError(PrymTauError):
    """A numerical or combinatorial step could not be completed."""


class CheckFailure(PrymTauError):
    """An asserted mathematical check did not hold."""


class DegenerateCurve(ComputationError):
    pass


class WrongDegree(ComputationError):
    pass


class OutsideChart(ComputationError):
    pass


class NonSimpleStratum(ComputationError):
    pass


class RankMismatch(ComputationError):
    pass


class SizeMismatch(ComputationError):
    pass


class SheetTrackingFailure(ComputationError):
    pass


class RankDeficient(ComputationError):
    pass


class NonPeriodic(ComputationError):
    pass


class DimensionMismatch(ComputationError):
    pass


class ToleranceNotMet(ComputationError):
    pass


class SheetJump(ComputationError):
    pass


class NotPositiveDefinite(ComputationError):
    pass


class VanishingTestFailed(ComputationError):
    pass


class SingularOddCharacteristic(ComputationError):
    pass


class BranchInconsistency(ComputationError):
    pass


class DeformationSolveFailed(ComputationError):
    pass


class GridTooCoarse(ComputationError):
    pass


class InconclusiveFit(ComputationError):
    pass


class CycleTrackingLost(ComputationError):
    pass


class FrameDegenerationUnresolved(ComputationError):
    pass
