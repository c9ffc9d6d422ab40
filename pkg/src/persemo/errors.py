"""Exception hierarchy.

Three broad groups, mirroring the CLI exit codes: configuration problems
(exit 2), data problems (exit 3), and numerical failures (exit 4).
"""


class PersemoError(Exception):
    """Base class for every error raised by this package."""


class ConfigError(PersemoError):
    """A run configuration is malformed or internally inconsistent."""

    exit_code = 2


class DataError(PersemoError):
    """Input data violates a contract."""

    exit_code = 3


class NumericalError(PersemoError):
    """A computation produced non-finite or otherwise unusable numbers."""

    exit_code = 4


# ingest

class MissingColumn(DataError):
    def __init__(self, column: str, path: str | None = None):
        self.column = column
        self.path = path
        where = f" in {path}" if path else ""
        super().__init__(f"required column {column!r} not found{where}")


class NonFiniteValue(DataError):
    def __init__(self, row: int, column: str, value=None):
        self.row = row
        self.column = column
        self.value = value
        shown = "" if value is None else f" (got {value!r})"
        super().__init__(f"non-finite value at row {row}, column {column!r}{shown}")


class DuplicateFrame(DataError):
    def __init__(self, subject_id: str, clip_id: str, frame_index: int):
        self.subject_id = subject_id
        self.clip_id = clip_id
        self.frame_index = frame_index
        super().__init__(
            f"duplicate frame (subject={subject_id!r}, clip={clip_id!r}, "
            f"frame={frame_index})"
        )


class InvalidLabel(DataError):
    def __init__(self, kind: str, value: str, row: int | None = None):
        self.kind = kind
        self.value = value
        self.row = row
        where = f" at row {row}" if row is not None else ""
        super().__init__(f"unknown {kind} label {value!r}{where}")


class SchemaMismatch(DataError):
    """Objects built against different feature schemas were combined."""


# curation

class InsufficientEmotions(DataError):
    def __init__(self, subject_id: str, eligible: int, required: int):
        self.subject_id = subject_id
        self.eligible = eligible
        self.required = required
        super().__init__(
            f"subject {subject_id!r} has {eligible} eligible emotions, "
            f"needs {required}"
        )


class EmptyClass(DataError):
    def __init__(self, emotion: str):
        self.emotion = emotion
        super().__init__(f"no frames available for emotion {emotion!r}")


class EmptyPool(DataError):
    """No subjects left to build a pooled training set from."""


class DegenerateSplit(DataError):
    """A temporal split produced an empty train or test side."""


# classifiers

class KTooLarge(DataError):
    def __init__(self, k: int, n: int):
        self.k = k
        self.n = n
        super().__init__(f"k={k} exceeds the {n} available training frames")


class DegenerateTraining(DataError):
    """Training data does not contain at least two classes."""


class NoSplits(DataError):
    """No tree in a forest performed a single split."""


class NonFiniteLoss(NumericalError):
    def __init__(self, epoch: int):
        self.epoch = epoch
        super().__init__(f"training loss became non-finite at epoch {epoch}")


# evaluation / analysis / protocol

class StratificationImpossible(DataError):
    def __init__(self, label: str, count: int, folds: int):
        self.label = label
        self.count = count
        self.folds = folds
        super().__init__(
            f"class {label!r} has {count} samples, fewer than {folds} folds"
        )


class SingleClass(DataError):
    """An analysis that needs at least two classes received one."""


class IncompleteReport(DataError):
    """A comparison report is missing cells required for aggregation."""


class InvalidSpec(ConfigError):
    """A synthetic cohort specification is out of contract."""


def annotate(err: PersemoError, note: str) -> PersemoError:
    """Prefix an error's message with context, preserving its type."""
    err.args = (f"[{note}] {err}",)
    return err
