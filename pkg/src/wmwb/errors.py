"""Exception taxonomy for the toolkit.

Every error raised on a contract violation derives from WmwbError so CLI
and library callers can catch one base type. Names state the violated
condition, not the module that noticed it.
"""

from __future__ import annotations


class WmwbError(Exception):
    """Base class for all toolkit errors."""


# --- audio decode ---------------------------------------------------------

class AudioError(WmwbError):
    pass


class MalformedHeaderError(AudioError):
    """Container structure is not a parseable RIFF/WAVE file."""


class UnsupportedEncodingError(AudioError):
    """Valid container, but a sample encoding outside the supported set."""


class TruncatedDataError(AudioError):
    """Declared payload extends past the end of the file."""


class EmptyInputError(AudioError):
    """Zero audio frames where at least one is required."""


# --- annotations and manifest --------------------------------------------

class LabelError(WmwbError):
    pass


class LineError(LabelError):
    """Base for errors tied to one label-file line (1-based line_no)."""

    def __init__(self, line_no: int, detail: str, path=None):
        where = f"{path}:{line_no}" if path is not None else f"line {line_no}"
        super().__init__(f"{where}: {detail}")
        self.line_no = line_no
        self.detail = detail
        self.path = path


class MalformedLineError(LineError):
    """Label line does not parse as start<TAB>end<TAB>label."""


class InvertedIntervalError(LineError):
    """Region end time is not strictly after its start time."""


class ManifestError(WmwbError):
    pass


class OrphanAudioError(ManifestError):
    """Audio files with no matching label file."""


class OrphanLabelsError(ManifestError):
    """Label files with no matching audio file."""


class DuplicateSourceIdError(ManifestError):
    """The same source id appears more than once in the dataset tree."""


class EmptyLabelFileError(ManifestError):
    """A label file parsed to zero regions."""


class EmptyManifestError(ManifestError):
    """A manifest with no entries where work was expected."""


# --- segmentation ---------------------------------------------------------

class SegmentError(WmwbError):
    pass


class RegionOutOfBoundsError(SegmentError):
    """Annotated region does not fit inside the decoded audio."""


class EmptySegmentError(SegmentError):
    """Zero-length segment where at least one sample is required."""


# --- features -------------------------------------------------------------

class FeatureError(WmwbError):
    pass


class DegenerateFilterError(FeatureError):
    """A mel filter row has no nonzero weight."""


# --- network graphs and model files ---------------------------------------

class GraphError(WmwbError):
    pass


class UnknownArchError(GraphError):
    """Requested architecture is not in the catalog."""


class ShapeMismatchError(GraphError):
    """Tensor or weight shapes disagree with what the graph declares."""


class ModelFileError(WmwbError):
    pass


class BadMagicError(ModelFileError):
    """File does not start with the expected magic bytes."""


class VersionUnsupportedError(ModelFileError):
    """File format version this build does not read."""


class TruncatedFileError(ModelFileError):
    """File ends before its declared structure is complete."""


# --- inference and evaluation ---------------------------------------------

class NonFiniteActivationError(WmwbError):
    """NaN or infinity appeared in a layer output."""


class IndexOutOfRangeError(WmwbError):
    """Class index outside [0, n_classes)."""


class BadFractionsError(WmwbError):
    """Split fractions are not three positive numbers summing to one."""


class NonDeterministicOutputError(WmwbError):
    """Repeated runs of a fixed input produced different outputs."""
