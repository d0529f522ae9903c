"""Exception hierarchy.

Three branches map onto the CLI exit codes: DataError -> 2, ConfigError -> 3,
LearnerError -> 4.
"""


class DtcError(Exception):
    pass


class DataError(DtcError):
    """Problems with input data or persisted artifacts."""


class ConfigError(DtcError):
    """Invalid configuration, unknown names, out-of-range parameters."""


class LearnerError(DtcError):
    """Training-time failures inside a learner."""


# -- data / format --------------------------------------------------------

class IoError(DataError):
    pass


class FormatError(DataError):
    pass


class UnknownColumn(DataError):
    pass


class UnknownLabel(DataError):
    pass


class NonNumericCell(DataError):
    pass


class EmptyDataset(DataError):
    pass


class MaskedDataError(DataError):
    pass


class TooFewSamples(DataError):
    pass


class EmptyInput(DataError):
    pass


class LengthMismatch(DataError):
    pass


class SingleClass(DataError):
    pass


class ShapeMismatch(DataError):
    pass


class IndexOutOfRange(DataError):
    pass


class EmptyMatrix(DataError):
    pass


class ColumnMismatch(DataError):
    pass


class VersionMismatch(DataError):
    pass


class SchemaError(DataError):
    pass


# -- configuration ---------------------------------------------------------

class OutOfRange(ConfigError):
    pass


class SpecMismatch(ConfigError):
    pass


# -- learners ---------------------------------------------------------------

class EmptyNode(LearnerError):
    pass


class WeakLearnerTooWeak(LearnerError):
    pass


class PerfectLearner(LearnerError):
    """Signal: a weak learner with zero weighted error. Handled internally
    by the boosting loop, never propagated to callers."""


class NoUsableRound(LearnerError):
    pass


class KTooLarge(LearnerError):
    pass
