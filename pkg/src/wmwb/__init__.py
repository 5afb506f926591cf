"""Bird species classification from annotated field recordings.

Pipeline: wav decode -> annotated region cutting -> one-second windows ->
log-mel feature images -> CNN inference -> per-class metrics. Everything
runs on numpy; model weights travel in a self-describing binary format.
"""

__version__ = "0.1.0"

from .annotation import LabelRegion, Manifest, ManifestEntry, build_manifest, parse_label_file
from .audio import SAMPLE_RATE, AudioClip, DecodedWav, load_clip, read_wav, to_mono_resample
from .bench import BenchReport, bench_forward
from .classifier import NetworkClassifier
from .config import PipelineConfig, load_config
from .errors import (
    BadMagicError,
    GraphError,
    ShapeMismatchError,
    TruncatedFileError,
    VersionUnsupportedError,
    WmwbError,
)
from .features import (
    FeatureConfig,
    MelSpectrogramFeaturizer,
    featurize_window,
    mel_filterbank,
    read_feature_file,
    write_feature_file,
)
from .metrics import (
    ConfusionMatrix,
    class_metrics,
    confusion_from_predictions,
    f1_histogram,
    macro_metrics,
)
from .netgraph import (
    NetGraph,
    build_catalog,
    count_params,
    depth_report,
    footprint_mib,
    init_random,
    load_model,
    save_model,
    weight_shapes,
)
from .ops import Prediction, forward
from .segment import Window, cut_regions, segment_clip, windowize
from .split import SplitAssignment, split_by_source

__all__ = [
    "__version__",
    "SAMPLE_RATE",
    "AudioClip",
    "BadMagicError",
    "BenchReport",
    "ConfusionMatrix",
    "DecodedWav",
    "FeatureConfig",
    "GraphError",
    "LabelRegion",
    "Manifest",
    "ManifestEntry",
    "MelSpectrogramFeaturizer",
    "NetGraph",
    "NetworkClassifier",
    "PipelineConfig",
    "Prediction",
    "ShapeMismatchError",
    "SplitAssignment",
    "TruncatedFileError",
    "VersionUnsupportedError",
    "Window",
    "WmwbError",
    "bench_forward",
    "build_catalog",
    "build_manifest",
    "class_metrics",
    "confusion_from_predictions",
    "count_params",
    "cut_regions",
    "depth_report",
    "f1_histogram",
    "featurize_window",
    "footprint_mib",
    "forward",
    "init_random",
    "load_clip",
    "load_config",
    "load_model",
    "macro_metrics",
    "mel_filterbank",
    "parse_label_file",
    "read_feature_file",
    "read_wav",
    "save_model",
    "segment_clip",
    "split_by_source",
    "to_mono_resample",
    "weight_shapes",
    "windowize",
    "write_feature_file",
]
