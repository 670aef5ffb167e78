"""Exception hierarchy shared by all estimation modules."""


class ReplicaDetectError(Exception):
    """Base class for all library errors."""


class InvalidArgument(ReplicaDetectError):
    pass


class NonFinite(InvalidArgument):
    """Input contains NaN or infinite entries."""


class ZeroVarianceColumn(ReplicaDetectError):
    """A column has (numerically) zero sample variance."""

    def __init__(self, column, message=None):
        self.column = column
        super().__init__(message or f"column {column} has zero variance")


class IndexOutOfRange(InvalidArgument):
    pass


class DimensionTooSmall(InvalidArgument):
    pass


class DegenerateRow(ReplicaDetectError):
    """A leave-two-out correlation row is numerically zero.

    Signals an unscreened pure-noise feature; the offending feature
    index is stored in ``index``.
    """

    def __init__(self, index, message=None):
        self.index = index
        super().__init__(message or f"leave-two-out row of feature {index} is zero")


class GroupTooSmall(ReplicaDetectError):
    def __init__(self, group, message=None):
        self.group = group
        super().__init__(message or f"group {group} has fewer than 2 members")


class EmptyGroup(ReplicaDetectError):
    pass


class InvalidR(InvalidArgument):
    """Pruning step count outside 1..G."""


class NoParallelPairs(ReplicaDetectError):
    """No pair of features scored below threshold: no replicates detected."""


class RankZero(ReplicaDetectError):
    """All eigenvalues fell below the rank threshold mu."""


class RankDeficientLoadings(ReplicaDetectError):
    """Columns of the pure-row loading block are numerically dependent."""


class SingularSigmaZ(ReplicaDetectError):
    pass


class DegenerateSplit(ReplicaDetectError):
    """A cross-validation split produced zero-variance columns."""


class AllRemoved(ReplicaDetectError):
    """Pre-screening would remove every feature."""


class InvalidScenario(InvalidArgument):
    """Simulation scenario violates a constraint (named in the message)."""


class UniverseMismatch(InvalidArgument):
    """Estimate and ground truth refer to different variable universes."""
