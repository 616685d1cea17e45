"""Exception hierarchy shared by all modules."""


class ETCError(ValueError):
    """Base class for all errors raised by etctest."""


# ---------------------------------------------------------------------------
# Operating conditions and samples
# ---------------------------------------------------------------------------


class NegativeCost(ETCError):
    pass


class PrevalenceOutOfRange(ETCError):
    pass


class DegenerateOperatingCondition(ETCError):
    """One class carries zero weight, so the null distribution collapses."""


class SingleClassSample(ETCError):
    pass


class TiedAcrossClasses(ETCError):
    """Equal values carry different labels; use ``etc_hat_conservative``."""


class IndexOutOfRange(ETCError):
    pass


# ---------------------------------------------------------------------------
# Counting engine
# ---------------------------------------------------------------------------


class InvalidCell(ETCError):
    pass


class EnumerationTooLarge(ETCError):
    pass


class PartitionSumMismatch(ETCError):
    """Cell counts do not add up to C(n, n0). Always an engine bug."""


class FormatVersionMismatch(ETCError):
    pass


class ChecksumMismatch(ETCError):
    pass


# ---------------------------------------------------------------------------
# Filtering and simulation
# ---------------------------------------------------------------------------


class ParseError(ETCError):
    def __init__(self, message, row=None, col=None):
        super().__init__(message)
        self.row = row
        self.col = col


class LabelMismatch(ETCError):
    pass


class SingleClassLabels(ETCError):
    pass


class NdMismatch(ETCError):
    pass


class ValueOutOfRange(ETCError):
    pass


class InvalidGridPoint(ETCError):
    pass


class EmptySignalSet(ETCError):
    pass
