"""Keras checkpoint to WMWB model converter."""

__version__ = "0.1.0"

from .errors import ExportError, LayerMismatchError, MissingWeightsError
from .export import (
    PARITY_TOLERANCE,
    canonical_layout,
    check_padding,
    emit_fixtures,
    export,
    export_model,
    iter_fixtures,
    load_checkpoint,
    verify_parity,
)
from .manifest import ExportManifest

__all__ = [
    "__version__",
    "PARITY_TOLERANCE",
    "ExportError",
    "ExportManifest",
    "LayerMismatchError",
    "MissingWeightsError",
    "canonical_layout",
    "check_padding",
    "emit_fixtures",
    "export",
    "export_model",
    "iter_fixtures",
    "load_checkpoint",
    "verify_parity",
]
