"""Network graphs: layer specs, catalog builders, params, model files.

A graph is a topologically ordered list of layers. Activations are
(height, width, channels) feature maps or flat vectors; weight tensors use
kh x kw x cin x cout for convolutions, kh x kw x cin for depthwise, and
in x out for dense layers. Batchnorm carries gamma, beta, moving mean,
moving variance, in that order.

Catalog ids follow the widely used builder names for each architecture
(block1_conv1, conv3_block2_2_conv, block_6_expand, ...) so exported
weights map onto catalog graphs by id alone.
"""

from __future__ import annotations

import io
import json
import struct
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import (
    BadMagicError,
    GraphError,
    ShapeMismatchError,
    TruncatedFileError,
    UnknownArchError,
    VersionUnsupportedError,
)

MODEL_MAGIC = b"WMWB"
MODEL_FORMAT_VERSION = 1

ARCHS = ("vgg16", "resnet50", "mobilenet_v2")
HEADS = ("imagenet_reference", "custom")
INPUT_SHAPE = (224, 224, 3)

PUBLISHED_DEPTH = {"vgg16": 23, "resnet50": 50, "mobilenet_v2": 88}
"""Depth figures as published alongside each architecture. Carried as
metadata; structural layer counts live in depth_report."""

KINDS = frozenset(
    {
        "input",
        "conv2d",
        "depthwise_conv2d",
        "dense",
        "batchnorm",
        "relu",
        "relu6",
        "maxpool2d",
        "avgpool2d",
        "global_avgpool",
        "flatten",
        "add",
        "dropout",
        "softmax",
    }
)

_WEIGHTED = frozenset({"conv2d", "depthwise_conv2d", "dense", "batchnorm"})


def _pair(v) -> list[int]:
    if isinstance(v, (list, tuple)):
        a, b = v
        return [int(a), int(b)]
    return [int(v), int(v)]


def _pad4(v) -> list[list[int]]:
    (t, b), (l, r) = v
    return [[int(t), int(b)], [int(l), int(r)]]


@dataclass
class LayerSpec:
    id: str
    kind: str
    input_ids: list[str] = field(default_factory=list)
    attrs: dict = field(default_factory=dict)


@dataclass
class NetGraph:
    layers: list[LayerSpec]
    input_shape: tuple[int, int, int] = INPUT_SHAPE
    n_classes: int = 2
    meta: dict = field(default_factory=dict)
    weights: dict[str, list[np.ndarray]] = field(default_factory=dict)

    def layer(self, layer_id: str) -> LayerSpec:
        for l in self.layers:
            if l.id == layer_id:
                return l
        raise GraphError(f"no layer {layer_id!r}")

    def weighted_layers(self) -> list[LayerSpec]:
        return [l for l in self.layers if l.kind in _WEIGHTED]

    def is_weighted(self) -> bool:
        return all(l.id in self.weights for l in self.weighted_layers())


# --- validation and shape inference ----------------------------------------

def validate_graph(g: NetGraph) -> None:
    """Structural checks: raises GraphError on the first violation."""
    if not g.layers:
        raise GraphError("graph has no layers")
    seen: set[str] = set()
    softmaxes = 0
    for i, l in enumerate(g.layers):
        if l.kind not in KINDS:
            raise GraphError(f"layer {l.id!r}: unknown kind {l.kind!r}")
        if l.id in seen:
            raise GraphError(f"duplicate layer id {l.id!r}")
        seen.add(l.id)
        want = 0 if l.kind == "input" else 2 if l.kind == "add" else 1
        if len(l.input_ids) != want:
            raise GraphError(
                f"layer {l.id!r}: {l.kind} takes {want} inputs, has {len(l.input_ids)}"
            )
        for src in l.input_ids:
            if src not in seen or src == l.id:
                raise GraphError(
                    f"layer {l.id!r}: input {src!r} not defined earlier (graph "
                    "must be listed in topological order)"
                )
        if l.kind == "input" and i != 0:
            raise GraphError("input layer must come first")
        if l.kind == "dropout" and not 0.0 <= l.attrs.get("rate", 0.0) < 1.0:
            raise GraphError(f"layer {l.id!r}: dropout rate must be in [0, 1)")
        if l.kind in ("conv2d", "depthwise_conv2d", "maxpool2d", "avgpool2d"):
            if l.attrs.get("padding") not in ("same", "valid"):
                raise GraphError(f"layer {l.id!r}: padding must be same or valid")
            if min(_pair(l.attrs["stride"])) < 1:
                raise GraphError(f"layer {l.id!r}: stride must be >= 1")
        if l.kind == "softmax":
            softmaxes += 1
    if g.layers[0].kind != "input":
        raise GraphError("first layer must be the input layer")
    if softmaxes != 1 or g.layers[-1].kind != "softmax":
        raise GraphError("graph must end in exactly one softmax layer")


def _spatial_out(size: int, k: int, stride: int, padding: str, pad_lo: int, pad_hi: int) -> int:
    size = size + pad_lo + pad_hi
    if padding == "same":
        return -(-size // stride)
    if size < k:
        raise ShapeMismatchError(f"spatial size {size} smaller than kernel {k}")
    return (size - k) // stride + 1


def _flat(shape) -> int:
    return int(np.prod(shape))


def infer_shapes(g: NetGraph) -> dict[str, tuple]:
    """Output shape of every layer; raises ShapeMismatchError on conflicts."""
    validate_graph(g)
    shapes: dict[str, tuple] = {}
    for l in g.layers:
        ins = [shapes[s] for s in l.input_ids]
        try:
            shapes[l.id] = _layer_out_shape(g, l, ins)
        except ShapeMismatchError as e:
            raise ShapeMismatchError(f"layer {l.id!r}: {e}") from None
    return shapes


def _layer_out_shape(g: NetGraph, l: LayerSpec, ins: list[tuple]) -> tuple:
    kind, attrs = l.kind, l.attrs
    if kind == "input":
        return tuple(g.input_shape)
    if kind == "add":
        if ins[0] != ins[1]:
            raise ShapeMismatchError(f"cannot add {ins[0]} to {ins[1]}")
        return ins[0]
    x = ins[0]
    if kind in ("relu", "relu6", "dropout", "softmax", "batchnorm"):
        return x
    if kind == "flatten":
        return (_flat(x),)
    if kind == "dense":
        return (int(attrs["units"]),)
    if kind == "global_avgpool":
        if len(x) != 3:
            raise ShapeMismatchError(f"needs a feature map, got {x}")
        return (x[2],)
    if len(x) != 3:
        raise ShapeMismatchError(f"needs a feature map, got {x}")
    h, w, c = x
    kh, kw = _pair(attrs["kernel" if "conv" in kind else "pool"])
    sh, sw = _pair(attrs["stride"])
    (pt, pb), (pl, pr) = attrs.get("pad") or ((0, 0), (0, 0))
    oh = _spatial_out(h, kh, sh, attrs["padding"], pt, pb)
    ow = _spatial_out(w, kw, sw, attrs["padding"], pl, pr)
    if kind == "conv2d":
        return (oh, ow, int(attrs["filters"]))
    return (oh, ow, c)


def weight_shapes(g: NetGraph) -> dict[str, list[tuple]]:
    """Expected weight tensor shapes per weighted layer, in blob order."""
    shapes = infer_shapes(g)
    out: dict[str, list[tuple]] = {}
    for l in g.layers:
        if l.kind not in _WEIGHTED:
            continue
        x = shapes[l.input_ids[0]]
        cin = x[-1] if len(x) == 3 else _flat(x)
        if l.kind == "conv2d":
            kh, kw = _pair(l.attrs["kernel"])
            ws = [(kh, kw, cin, int(l.attrs["filters"]))]
            if l.attrs.get("use_bias", True):
                ws.append((int(l.attrs["filters"]),))
        elif l.kind == "depthwise_conv2d":
            kh, kw = _pair(l.attrs["kernel"])
            ws = [(kh, kw, cin)]
            if l.attrs.get("use_bias", True):
                ws.append((cin,))
        elif l.kind == "dense":
            units = int(l.attrs["units"])
            ws = [(cin, units)]
            if l.attrs.get("use_bias", True):
                ws.append((units,))
        else:  # batchnorm: gamma, beta, moving mean, moving variance
            c = x[-1]
            ws = [(c,), (c,), (c,), (c,)]
        out[l.id] = ws
    return out


@dataclass
class ParamReport:
    total: int
    trainable: int
    non_trainable: int
    per_layer: dict[str, int]


def param_report(g: NetGraph) -> ParamReport:
    """Parameter census. Batchnorm counts 4C, of which 2C non-trainable."""
    per_layer = {}
    trainable = 0
    non_trainable = 0
    for layer_id, ws in weight_shapes(g).items():
        n = sum(_flat(s) for s in ws)
        per_layer[layer_id] = n
        if g.layer(layer_id).kind == "batchnorm":
            trainable += n // 2
            non_trainable += n // 2
        else:
            trainable += n
    return ParamReport(
        total=trainable + non_trainable,
        trainable=trainable,
        non_trainable=non_trainable,
        per_layer=per_layer,
    )


def count_params(g: NetGraph) -> int:
    return param_report(g).total


def footprint_bytes(g: NetGraph) -> int:
    """Weight storage at float32: 4 bytes per parameter."""
    return 4 * count_params(g)


def footprint_mib(g: NetGraph) -> int:
    return round(footprint_bytes(g) / 2**20)


def conv_census(g: NetGraph) -> dict[str, int]:
    """Convolution bookkeeping by structural role.

    Roles come from catalog naming: stem convs are conv1_conv / Conv1,
    projection shortcuts end in _0_conv, and body is the rest.
    """
    convs = [l for l in g.layers if l.kind == "conv2d"]
    stem = sum(1 for l in convs if l.id in ("conv1_conv", "Conv1"))
    projections = sum(1 for l in convs if l.id.endswith("_0_conv"))
    return {
        "conv2d_total": len(convs),
        "depthwise_total": sum(1 for l in g.layers if l.kind == "depthwise_conv2d"),
        "stem": stem,
        "projections": projections,
        "body": len(convs) - stem - projections,
    }


def depth_report(g: NetGraph) -> dict:
    """Published depth metadata plus structural counts, side by side."""
    census = conv_census(g)
    weighted = g.weighted_layers()
    return {
        "published_depth": g.meta.get("published_depth"),
        "graph_layers": len(g.layers),
        "weighted_layers": sum(1 for l in weighted if l.kind != "batchnorm"),
        "batchnorm_layers": sum(1 for l in weighted if l.kind == "batchnorm"),
        "dense_layers": sum(1 for l in g.layers if l.kind == "dense"),
        "conv_census": census,
    }


# --- catalog -----------------------------------------------------------------

class _Builder:
    def __init__(self):
        self.layers: list[LayerSpec] = []
        self.last: str | None = None

    def add(self, kind: str, layer_id: str, inputs=None, **attrs) -> str:
        if inputs is None:
            inputs = [] if kind == "input" else [self.last]
        elif isinstance(inputs, str):
            inputs = [inputs]
        for key in ("kernel", "stride", "pool"):
            if key in attrs:
                attrs[key] = _pair(attrs[key])
        if "pad" in attrs:
            attrs["pad"] = _pad4(attrs["pad"])
        self.layers.append(LayerSpec(layer_id, kind, list(inputs), attrs))
        self.last = layer_id
        return layer_id


def _vgg16_body(b: _Builder) -> None:
    for block, (n_convs, f) in enumerate([(2, 64), (2, 128), (3, 256), (3, 512), (3, 512)], start=1):
        for i in range(1, n_convs + 1):
            b.add("conv2d", f"block{block}_conv{i}", filters=f, kernel=3, stride=1,
                  padding="same", use_bias=True)
            b.add("relu", f"block{block}_conv{i}_relu")
        b.add("maxpool2d", f"block{block}_pool", pool=2, stride=2, padding="valid")


def _resnet50_body(b: _Builder) -> None:
    eps = 1.001e-5
    b.add("conv2d", "conv1_conv", filters=64, kernel=7, stride=2, padding="valid",
          pad=((3, 3), (3, 3)), use_bias=True)
    b.add("batchnorm", "conv1_bn", epsilon=eps)
    b.add("relu", "conv1_relu")
    b.add("maxpool2d", "pool1_pool", pool=3, stride=2, padding="valid",
          pad=((1, 1), (1, 1)))
    for stack, (f, n_blocks) in enumerate([(64, 3), (128, 4), (256, 6), (512, 3)], start=2):
        for blk in range(1, n_blocks + 1):
            p = f"conv{stack}_block{blk}"
            stride = 2 if blk == 1 and stack > 2 else 1
            x = b.last
            if blk == 1:
                b.add("conv2d", f"{p}_0_conv", inputs=x, filters=4 * f, kernel=1,
                      stride=stride, padding="valid", use_bias=True)
                shortcut = b.add("batchnorm", f"{p}_0_bn", epsilon=eps)
            else:
                shortcut = x
            b.add("conv2d", f"{p}_1_conv", inputs=x, filters=f, kernel=1,
                  stride=stride, padding="valid", use_bias=True)
            b.add("batchnorm", f"{p}_1_bn", epsilon=eps)
            b.add("relu", f"{p}_1_relu")
            b.add("conv2d", f"{p}_2_conv", filters=f, kernel=3, stride=1,
                  padding="same", use_bias=True)
            b.add("batchnorm", f"{p}_2_bn", epsilon=eps)
            b.add("relu", f"{p}_2_relu")
            b.add("conv2d", f"{p}_3_conv", filters=4 * f, kernel=1, stride=1,
                  padding="valid", use_bias=True)
            b.add("batchnorm", f"{p}_3_bn", epsilon=eps)
            b.add("add", f"{p}_add", inputs=[shortcut, b.last])
            b.add("relu", f"{p}_out")


def _mobilenet_v2_body(b: _Builder) -> None:
    eps = 1e-3
    b.add("conv2d", "Conv1", filters=32, kernel=3, stride=2, padding="same",
          use_bias=False)
    b.add("batchnorm", "bn_Conv1", epsilon=eps)
    b.add("relu6", "Conv1_relu")
    b.add("depthwise_conv2d", "expanded_conv_depthwise", kernel=3, stride=1,
          padding="same", use_bias=False)
    b.add("batchnorm", "expanded_conv_depthwise_BN", epsilon=eps)
    b.add("relu6", "expanded_conv_depthwise_relu")
    b.add("conv2d", "expanded_conv_project", filters=16, kernel=1, stride=1,
          padding="same", use_bias=False)
    b.add("batchnorm", "expanded_conv_project_BN", epsilon=eps)
    cin = 16
    idx = 1
    for c, n_blocks, first_stride in [(24, 2, 2), (32, 3, 2), (64, 4, 2),
                                      (96, 3, 1), (160, 3, 2), (320, 1, 1)]:
        for i in range(n_blocks):
            stride = first_stride if i == 0 else 1
            p = f"block_{idx}"
            block_input = b.last
            b.add("conv2d", f"{p}_expand", filters=6 * cin, kernel=1, stride=1,
                  padding="same", use_bias=False)
            b.add("batchnorm", f"{p}_expand_BN", epsilon=eps)
            b.add("relu6", f"{p}_expand_relu")
            if stride == 2:
                # stride-2 blocks pad (0,1)x(0,1) explicitly, then run valid
                b.add("depthwise_conv2d", f"{p}_depthwise", kernel=3, stride=2,
                      padding="valid", pad=((0, 1), (0, 1)), use_bias=False)
            else:
                b.add("depthwise_conv2d", f"{p}_depthwise", kernel=3, stride=1,
                      padding="same", use_bias=False)
            b.add("batchnorm", f"{p}_depthwise_BN", epsilon=eps)
            b.add("relu6", f"{p}_depthwise_relu")
            b.add("conv2d", f"{p}_project", filters=c, kernel=1, stride=1,
                  padding="same", use_bias=False)
            b.add("batchnorm", f"{p}_project_BN", epsilon=eps)
            if stride == 1 and cin == c:
                b.add("add", f"{p}_add", inputs=[block_input, b.last])
            cin = c
            idx += 1
    b.add("conv2d", "Conv_1", filters=1280, kernel=1, stride=1, padding="valid",
          use_bias=False)
    b.add("batchnorm", "Conv_1_bn", epsilon=eps)
    b.add("relu6", "out_relu")


_BODIES = {
    "vgg16": _vgg16_body,
    "resnet50": _resnet50_body,
    "mobilenet_v2": _mobilenet_v2_body,
}


def build_catalog(
    arch: str,
    n_classes: int,
    head: str = "custom",
    hidden_width: int = 256,
    dropout_rate: float = 0.5,
) -> NetGraph:
    """Build an unweighted catalog graph.

    head="imagenet_reference" reproduces the published topology for the
    architecture; head="custom" replaces it with
    dense(hidden_width) + relu + dropout + dense(n_classes) + softmax
    on top of the flattened (vgg16) or globally pooled features.
    """
    if arch not in _BODIES:
        raise UnknownArchError(f"unknown architecture {arch!r}; catalog has {ARCHS}")
    if head not in HEADS:
        raise ValueError(f"head must be one of {HEADS}, got {head!r}")
    if n_classes < 2:
        raise ValueError(f"n_classes must be >= 2, got {n_classes}")

    b = _Builder()
    b.add("input", "input")
    _BODIES[arch](b)

    if head == "imagenet_reference":
        if arch == "vgg16":
            b.add("flatten", "flatten")
            b.add("dense", "fc1", units=4096, use_bias=True)
            b.add("relu", "fc1_relu")
            b.add("dense", "fc2", units=4096, use_bias=True)
            b.add("relu", "fc2_relu")
        else:
            b.add("global_avgpool", "avg_pool")
        b.add("dense", "predictions", units=n_classes, use_bias=True)
    else:
        if arch == "vgg16":
            b.add("flatten", "flatten")
        else:
            b.add("global_avgpool", "avg_pool")
        b.add("dense", "head_fc", units=hidden_width, use_bias=True)
        b.add("relu", "head_fc_relu")
        b.add("dropout", "head_dropout", rate=dropout_rate)
        b.add("dense", "predictions", units=n_classes, use_bias=True)
    b.add("softmax", "probs")

    g = NetGraph(
        layers=b.layers,
        input_shape=INPUT_SHAPE,
        n_classes=n_classes,
        meta={
            "arch": arch,
            "head": head,
            "published_depth": PUBLISHED_DEPTH[arch],
            **({"hidden_width": hidden_width, "dropout_rate": dropout_rate} if head == "custom" else {}),
        },
    )
    validate_graph(g)
    return g


def init_random(g: NetGraph, seed: int = 0) -> NetGraph:
    """Fill weights in place: He-scaled normals, identity batchnorm."""
    rng = np.random.default_rng(seed)
    for layer_id, ws in weight_shapes(g).items():
        kind = g.layer(layer_id).kind
        tensors = []
        if kind == "batchnorm":
            c = ws[0][0]
            tensors = [np.ones(c), np.zeros(c), np.zeros(c), np.ones(c)]
        else:
            kernel = ws[0]
            fan_in = _flat(kernel[:-1]) if kind != "depthwise_conv2d" else _flat(kernel[:2])
            tensors.append(rng.standard_normal(kernel) * np.sqrt(2.0 / fan_in))
            if len(ws) > 1:
                tensors.append(np.zeros(ws[1]))
        g.weights[layer_id] = [t.astype(np.float32) for t in tensors]
    return g


# --- model file format --------------------------------------------------------

def save_model_bytes(g: NetGraph) -> bytes:
    """Serialize a fully weighted graph.

    Layout: magic, u32 format version, u64 descriptor length, UTF-8 JSON
    descriptor, then raw little-endian float32 weight blobs concatenated in
    descriptor order with no padding.
    """
    expected = weight_shapes(g)
    missing = [lid for lid in expected if lid not in g.weights]
    if missing:
        raise GraphError(f"cannot save an unweighted graph; missing {missing}")
    for lid, shapes in expected.items():
        got = [tuple(a.shape) for a in g.weights[lid]]
        if got != [tuple(s) for s in shapes]:
            raise ShapeMismatchError(f"layer {lid!r}: weights {got}, graph says {shapes}")

    descriptor = {
        "input_shape": list(g.input_shape),
        "n_classes": g.n_classes,
        "meta": g.meta,
        "layers": [
            {
                "id": l.id,
                "kind": l.kind,
                "input_ids": l.input_ids,
                "attributes": l.attrs,
                "weight_shapes": [list(s) for s in expected.get(l.id, [])],
            }
            for l in g.layers
        ],
    }
    desc = json.dumps(descriptor).encode("utf-8")
    buf = io.BytesIO()
    buf.write(MODEL_MAGIC)
    buf.write(struct.pack("<I", MODEL_FORMAT_VERSION))
    buf.write(struct.pack("<Q", len(desc)))
    buf.write(desc)
    for l in g.layers:
        for arr in g.weights.get(l.id, []):
            buf.write(np.ascontiguousarray(arr, dtype="<f4").tobytes())
    return buf.getvalue()


def load_model_bytes(data: bytes) -> NetGraph:
    if len(data) < 4 or data[:4] != MODEL_MAGIC:
        raise BadMagicError("not a model file")
    if len(data) < 16:
        raise TruncatedFileError("model header incomplete")
    (version,) = struct.unpack_from("<I", data, 4)
    if version != MODEL_FORMAT_VERSION:
        raise VersionUnsupportedError(f"model format version {version}")
    (desc_len,) = struct.unpack_from("<Q", data, 8)
    if 16 + desc_len > len(data):
        raise TruncatedFileError("descriptor extends past end of file")
    try:
        descriptor = json.loads(data[16 : 16 + desc_len].decode("utf-8"))
    except (UnicodeDecodeError, json.JSONDecodeError) as e:
        raise TruncatedFileError(f"descriptor unreadable: {e}") from None

    layers = [
        LayerSpec(
            id=d["id"],
            kind=d["kind"],
            input_ids=list(d["input_ids"]),
            attrs=d.get("attributes", {}),
        )
        for d in descriptor["layers"]
    ]
    g = NetGraph(
        layers=layers,
        input_shape=tuple(descriptor["input_shape"]),
        n_classes=int(descriptor["n_classes"]),
        meta=descriptor.get("meta", {}),
    )
    expected = weight_shapes(g)

    # descriptor shapes must agree with what the layer attributes imply
    declared: list[tuple[str, tuple]] = []
    for d in descriptor["layers"]:
        shapes = [tuple(s) for s in d.get("weight_shapes", [])]
        if shapes != [tuple(s) for s in expected.get(d["id"], [])]:
            raise ShapeMismatchError(
                f"layer {d['id']!r}: descriptor declares {shapes}, "
                f"attributes imply {expected.get(d['id'], [])}"
            )
        declared.extend((d["id"], s) for s in shapes)

    need = sum(_flat(s) for _, s in declared) * 4
    body = data[16 + desc_len :]
    if len(body) != need:
        raise ShapeMismatchError(
            f"weight payload is {len(body)} bytes, descriptor declares {need}"
        )
    pos = 0
    for layer_id, shape in declared:
        nbytes = _flat(shape) * 4
        arr = np.frombuffer(body, dtype="<f4", count=_flat(shape), offset=pos).reshape(shape)
        g.weights.setdefault(layer_id, []).append(arr.copy())
        pos += nbytes
    return g


def save_model(path: str | Path, g: NetGraph) -> None:
    Path(path).write_bytes(save_model_bytes(g))


def load_model(path: str | Path) -> NetGraph:
    return load_model_bytes(Path(path).read_bytes())
