"""Checkpoint conversion into the toolkit's model format.

The exporter never reimplements any math: tensors are copied into the
canonical layouts (conv kh x kw x cin x cout, dense in x out, depthwise
kh x kw x cin) and correctness is established by comparing whole-model
outputs on parity fixtures, which isolates layout and padding-convention
bugs without duplicating the forward pass.
"""

from __future__ import annotations

from pathlib import Path

import numpy as np
from tensorflow import keras

from wmwb import (
    NetGraph,
    ShapeMismatchError,
    build_catalog,
    count_params,
    forward,
    read_feature_file,
    save_model,
    weight_shapes,
    write_feature_file,
)

from .errors import LayerMismatchError, MissingWeightsError
from .manifest import ExportManifest

PARITY_TOLERANCE = 1e-3
INPUT_SHAPE = (224, 224, 3)


def load_checkpoint(path: str | Path) -> keras.Model:
    return keras.models.load_model(path, compile=False)


def _source_weights(model: keras.Model) -> dict[str, list[np.ndarray]]:
    out = {}
    for layer in model.layers:
        w = layer.get_weights()
        if w:
            out[layer.name] = [np.asarray(t, dtype=np.float32) for t in w]
    return out


def canonical_layout(kind: str, tensors: list[np.ndarray], layer_id: str) -> list[np.ndarray]:
    """Transpose source tensors into the layouts the model format stores."""
    if kind == "depthwise_conv2d" and tensors and tensors[0].ndim == 4:
        kernel = tensors[0]
        if kernel.shape[-1] != 1:
            raise ShapeMismatchError(
                f"layer {layer_id!r}: depth multiplier {kernel.shape[-1]} is not supported"
            )
        tensors = [kernel[..., 0], *tensors[1:]]
    return tensors


def _producer_padding(model: keras.Model, name: str):
    """Padding of the ZeroPadding2D feeding `name`, or None if fed directly."""
    layer = model.get_layer(name)
    producer = layer.input._keras_history.operation
    if isinstance(producer, keras.layers.ZeroPadding2D):
        return tuple(tuple(int(v) for v in side) for side in producer.padding)
    return None


def check_padding(model: keras.Model, graph: NetGraph, mapping: dict[str, str]) -> None:
    """Abort if the source's zero-padding layers disagree with the graph.

    The graph folds asymmetric padding into a `pad` attribute on the layer
    it feeds; the source expresses the same thing as a separate
    ZeroPadding2D. Both directions of disagreement are mapping bugs.
    """
    source_names = {l.name for l in model.layers}
    for spec in graph.layers:
        if spec.kind not in ("conv2d", "depthwise_conv2d", "maxpool2d", "avgpool2d"):
            continue
        source_name = mapping.get(spec.id, spec.id)
        if source_name not in source_names:
            continue  # unweighted layer absent from the source; nothing to check
        want = spec.attrs.get("pad")
        want = tuple(tuple(int(v) for v in side) for side in want) if want else None
        got = _producer_padding(model, source_name)
        if want != got:
            raise LayerMismatchError(
                f"layer {spec.id!r}: source zero-padding {got} vs graph padding {want}"
            )


def export_model(model: keras.Model, manifest: ExportManifest) -> NetGraph:
    """Copy checkpoint weights into a catalog graph, validating the mapping."""
    graph = build_catalog(
        manifest.arch,
        manifest.n_classes,
        head=manifest.head,
        hidden_width=manifest.hidden_width,
        dropout_rate=manifest.dropout_rate,
    )
    targets = [l.id for l in graph.weighted_layers()]
    mapping = dict(manifest.mapping) if manifest.mapping is not None else {t: t for t in targets}

    unknown = sorted(set(mapping) - set(targets))
    if unknown:
        raise LayerMismatchError(f"mapping names unknown target layers: {unknown}")
    unmapped = [t for t in targets if t not in mapping]
    if unmapped:
        raise LayerMismatchError(f"unmapped target layers: {unmapped}")

    source = _source_weights(model)
    absent = sorted(set(mapping.values()) - set(source))
    if absent:
        raise LayerMismatchError(f"mapped source layers missing from checkpoint: {absent}")

    waived = set(manifest.waived)
    used = set(mapping.values())
    overlap = sorted(used & waived)
    if overlap:
        raise LayerMismatchError(f"source layers both mapped and waived: {overlap}")
    stale = sorted(waived - set(source))
    if stale:
        raise LayerMismatchError(f"waived layers not present in checkpoint: {stale}")
    leftover = sorted(set(source) - used - waived)
    if leftover:
        raise LayerMismatchError(f"source layers with weights need waivers: {leftover}")

    check_padding(model, graph, mapping)

    expected = weight_shapes(graph)
    for spec in graph.weighted_layers():
        tensors = canonical_layout(spec.kind, source[mapping[spec.id]], spec.id)
        want = [tuple(s) for s in expected[spec.id]]
        got = [t.shape for t in tensors]
        if len(got) < len(want):
            raise MissingWeightsError(
                f"layer {spec.id!r}: source provides {len(got)} tensors, target needs {len(want)}"
            )
        if got != want:
            raise ShapeMismatchError(f"layer {spec.id!r}: source shapes {got} vs expected {want}")
        graph.weights[spec.id] = tensors

    waived_params = sum(int(np.prod(t.shape)) for name in waived for t in source[name])
    if count_params(graph) + waived_params != model.count_params():
        raise ShapeMismatchError(
            f"exported graph has {count_params(graph)} parameters, "
            f"checkpoint reports {model.count_params()} minus {waived_params} waived"
        )
    return graph


def emit_fixtures(model: keras.Model, out_dir: str | Path, count: int = 5, seed: int = 0) -> list[Path]:
    """Write `count` parity fixtures: a feature image plus expected probabilities."""
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    rng = np.random.default_rng(seed)
    images = rng.random((count, *INPUT_SHAPE), dtype=np.float32)
    probs = model.predict(images, batch_size=count, verbose=0)
    paths = []
    for i in range(count):
        image_path = out_dir / f"fixture_{i:02d}.wmfi"
        write_feature_file(image_path, images[i])
        lines = "".join(f"{p:.9e}\n" for p in probs[i])
        image_path.with_name(f"fixture_{i:02d}.probs.txt").write_text(lines, encoding="utf-8")
        paths.append(image_path)
    return paths


def iter_fixtures(fixture_dir: str | Path):
    """Yield (image, expected_probs) pairs from a fixture directory, sorted."""
    for image_path in sorted(Path(fixture_dir).glob("fixture_*.wmfi")):
        probs_path = image_path.with_name(image_path.stem + ".probs.txt")
        probs = np.array(
            [float(line) for line in probs_path.read_text(encoding="utf-8").split()],
            dtype=np.float32,
        )
        yield read_feature_file(image_path), probs


def verify_parity(graph: NetGraph, fixture_dir: str | Path) -> list[float]:
    """Max per-class deviation of the toolkit forward pass, one per fixture."""
    diffs = []
    for image, expected in iter_fixtures(fixture_dir):
        got = forward(graph, image).probs
        if got.shape != expected.shape:
            raise ShapeMismatchError(
                f"fixture expects {expected.shape[0]} classes, model emits {got.shape[0]}"
            )
        diffs.append(float(np.abs(got - expected).max()))
    return diffs


def export(
    checkpoint: str | Path,
    manifest: ExportManifest,
    out_path: str | Path,
    fixtures: int = 5,
    seed: int = 0,
) -> tuple[NetGraph, Path]:
    """Convert a checkpoint file and write the model plus its parity fixtures."""
    model = load_checkpoint(checkpoint)
    graph = export_model(model, manifest)
    out_path = Path(out_path)
    out_path.parent.mkdir(parents=True, exist_ok=True)
    save_model(out_path, graph)
    fixture_dir = out_path.with_name(out_path.stem + "_fixtures")
    if fixtures > 0:
        emit_fixtures(model, fixture_dir, count=fixtures, seed=seed)
    return graph, fixture_dir
