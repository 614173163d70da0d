"""Exception hierarchy shared by the pipeline stages.

The CLI maps these onto exit codes, so every error raised on purpose by
the library derives from :class:`PahawError`.
"""

from __future__ import annotations


class PahawError(Exception):
    """Base class for all pipeline errors."""


# --- ingest -----------------------------------------------------------------


class IngestError(PahawError):
    """Problem reading a recording or manifest file."""

    path: str | None = None


class MalformedLine(IngestError):
    def __init__(self, line_no: int, reason: str = "", path: str | None = None):
        self.line_no = line_no
        self.reason = reason
        self.path = path
        where = f"{path}:" if path else "line "
        super().__init__(f"{where}{line_no}: malformed sample line{': ' + reason if reason else ''}")


class CountMismatch(IngestError):
    def __init__(self, expected: int, got: int, path: str | None = None):
        self.expected = expected
        self.got = got
        self.path = path
        super().__init__(f"{path or 'recording'}: header announces {expected} samples, found {got}")


class NonMonotoneTime(IngestError):
    def __init__(self, line_no: int, path: str | None = None):
        self.line_no = line_no
        self.path = path
        where = f"{path}:" if path else "line "
        super().__init__(f"{where}{line_no}: timestamp decreases")


class TooFewOnSurface(IngestError):
    def __init__(self, count: int, path: str | None = None):
        self.count = count
        self.path = path
        super().__init__(f"{path or 'recording'}: only {count} on-surface samples (need >= 2)")


class MalformedRow(IngestError):
    def __init__(self, row_no: int, reason: str = "", path: str | None = None):
        self.row_no = row_no
        self.reason = reason
        self.path = path
        super().__init__(f"{path or 'manifest'}: row {row_no}: {reason or 'malformed'}")


class DuplicateId(IngestError):
    def __init__(self, subject_id: str, path: str | None = None):
        self.subject_id = subject_id
        self.path = path
        super().__init__(f"{path or 'manifest'}: duplicate subject id {subject_id!r}")


class MissingFile(IngestError):
    def __init__(self, path: str):
        self.path = path
        super().__init__(f"missing file: {path}")


class EmptyGroup(PahawError):
    def __init__(self, label: str):
        self.label = label
        super().__init__(f"group {label!r} has no members")


# --- signal processing ------------------------------------------------------


class SignalError(PahawError):
    pass


class SeriesTooShort(SignalError):
    def __init__(self, length: int, minimum: int):
        self.length = length
        self.minimum = minimum
        super().__init__(f"series of length {length} is shorter than {minimum}")


class SpanTooLarge(SignalError):
    def __init__(self, span: int, length: int):
        self.span = span
        self.length = length
        super().__init__(f"smoothing span {span} exceeds series length {length}")


class AllTimestampsEqual(SignalError):
    pass


class StrokeTooShort(SignalError):
    def __init__(self, length: int, minimum: int = 4):
        self.length = length
        super().__init__(f"stroke has {length} samples, need at least {minimum}")


class ZeroDuration(SignalError):
    pass


class NoStrokes(SignalError):
    pass


# --- feature matrices -------------------------------------------------------


class FeatureError(PahawError):
    pass


class EmptyInput(FeatureError):
    pass


class TaskUnavailable(FeatureError):
    def __init__(self, task_id: int, available: int):
        self.task_id = task_id
        self.available = available
        super().__init__(f"task {task_id}: only {available} subject(s) have this task")


class NoCommonSubjects(FeatureError):
    pass


class DegenerateFitSet(FeatureError):
    pass


# --- statistics -------------------------------------------------------------


class ConstantLabels(PahawError):
    pass


class NoSignificantFeatures(PahawError):
    def __init__(self, alpha: float, n_tested: int):
        self.alpha = alpha
        self.n_tested = n_tested
        super().__init__(f"none of {n_tested} features reached p < {alpha}")


# --- classifiers ------------------------------------------------------------


class ClassifierError(PahawError):
    pass


class SingleClass(ClassifierError):
    pass


class DimensionMismatch(ClassifierError):
    pass


class TooFewSamples(ClassifierError):
    pass


class EmptyModel(ClassifierError):
    pass


class SolverStallWarning(RuntimeWarning):
    """SMO hit its iteration cap before the KKT gap closed."""


# --- evaluation -------------------------------------------------------------


class ProtocolError(PahawError):
    pass


class ClassTooSmall(ProtocolError):
    def __init__(self, label: int, count: int, n_folds: int):
        self.label = label
        self.count = count
        self.n_folds = n_folds
        super().__init__(f"class {label} has {count} members, fewer than {n_folds} folds")


class InvalidSpec(PahawError):
    pass
