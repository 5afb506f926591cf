"""Exporter failure modes.

Shape problems reuse the toolkit's ShapeMismatchError so callers can catch
one family of errors across both packages.
"""


class ExportError(Exception):
    """Base class for everything this package raises on purpose."""


class LayerMismatchError(ExportError):
    """The mapping between checkpoint layers and graph layers does not close."""


class MissingWeightsError(ExportError):
    """A mapped source layer carries fewer tensors than the target needs."""
