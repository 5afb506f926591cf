"""Inference-only layer operations and graph forward pass.

Activations are float32 (h, w, c) maps or flat vectors; every op
accumulates in float64 and casts the result back to float32, so results
are reproducible across BLAS builds to well under the 1e-5 testing
tolerance. `same` padding follows the convention of splitting an odd pad
as (floor, ceil), i.e. the extra row/column goes low-index-last.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import NonFiniteActivationError, ShapeMismatchError
from .netgraph import NetGraph, _pair, validate_graph, weight_shapes


def same_pads(size: int, k: int, stride: int) -> tuple[int, int]:
    """(low, high) zero pad so out = ceil(size / stride)."""
    out = -(-size // stride)
    total = max((out - 1) * stride + k - size, 0)
    return total // 2, total - total // 2


def _pad_hw(x: np.ndarray, pads, value: float = 0.0) -> np.ndarray:
    (pt, pb), (pl, pr) = pads
    if not (pt or pb or pl or pr):
        return x
    return np.pad(x, ((pt, pb), (pl, pr), (0, 0)), constant_values=value)


def _resolve_pads(h, w, kh, kw, sh, sw, padding, explicit):
    (pt, pb), (pl, pr) = explicit or ((0, 0), (0, 0))
    if padding == "same":
        st, sb = same_pads(h + pt + pb, kh, sh)
        sl, sr = same_pads(w + pl + pr, kw, sw)
        return (pt + st, pb + sb), (pl + sl, pr + sr)
    return (pt, pb), (pl, pr)


def _out_hw(h, w, kh, kw, sh, sw):
    return (h - kh) // sh + 1, (w - kw) // sw + 1


def _check_bias(bias, n):
    b = np.asarray(bias, dtype=np.float64)
    if b.shape != (n,):
        raise ShapeMismatchError(f"bias {b.shape} does not match {n} output channels")
    return b


def conv2d(x, kernel, bias=None, stride=(1, 1), padding="same", pad=None):
    """Cross-correlation of (h, w, cin) with (kh, kw, cin, cout)."""
    x = np.asarray(x)
    kernel = np.asarray(kernel, dtype=np.float64)
    kh, kw, cin, cout = kernel.shape
    if x.ndim != 3 or x.shape[2] != cin:
        raise ShapeMismatchError(f"input {x.shape} does not feed kernel {kernel.shape}")
    sh, sw = _pair(stride)
    xp = _pad_hw(x.astype(np.float64), _resolve_pads(*x.shape[:2], kh, kw, sh, sw, padding, pad))
    oh, ow = _out_hw(*xp.shape[:2], kh, kw, sh, sw)
    if oh < 1 or ow < 1:
        raise ShapeMismatchError(f"kernel {kernel.shape[:2]} larger than padded input {xp.shape[:2]}")
    acc = np.zeros((oh, ow, cout))
    for u in range(kh):
        for v in range(kw):
            patch = xp[u : u + (oh - 1) * sh + 1 : sh, v : v + (ow - 1) * sw + 1 : sw]
            acc += patch @ kernel[u, v]
    if bias is not None:
        acc += _check_bias(bias, cout)
    return acc.astype(np.float32)


def depthwise_conv2d(x, kernel, bias=None, stride=(1, 1), padding="same", pad=None):
    """Per-channel cross-correlation with (kh, kw, cin)."""
    x = np.asarray(x)
    kernel = np.asarray(kernel, dtype=np.float64)
    kh, kw, cin = kernel.shape
    if x.ndim != 3 or x.shape[2] != cin:
        raise ShapeMismatchError(f"input {x.shape} does not feed kernel {kernel.shape}")
    sh, sw = _pair(stride)
    xp = _pad_hw(x.astype(np.float64), _resolve_pads(*x.shape[:2], kh, kw, sh, sw, padding, pad))
    oh, ow = _out_hw(*xp.shape[:2], kh, kw, sh, sw)
    if oh < 1 or ow < 1:
        raise ShapeMismatchError(f"kernel {kernel.shape[:2]} larger than padded input {xp.shape[:2]}")
    acc = np.zeros((oh, ow, cin))
    for u in range(kh):
        for v in range(kw):
            patch = xp[u : u + (oh - 1) * sh + 1 : sh, v : v + (ow - 1) * sw + 1 : sw]
            acc += patch * kernel[u, v]
    if bias is not None:
        acc += _check_bias(bias, cin)
    return acc.astype(np.float32)


def dense(x, w, bias=None):
    x = np.asarray(x).reshape(-1)
    w = np.asarray(w, dtype=np.float64)
    if x.shape[0] != w.shape[0]:
        raise ShapeMismatchError(f"vector of {x.shape[0]} does not feed weights {w.shape}")
    y = x.astype(np.float64) @ w
    if bias is not None:
        y = y + _check_bias(bias, w.shape[1])
    return y.astype(np.float32)


def batchnorm(x, gamma, beta, mean, variance, epsilon):
    """Inference-mode normalization with stored moments, per channel."""
    x64 = np.asarray(x, dtype=np.float64)
    g = np.asarray(gamma, dtype=np.float64)
    b = np.asarray(beta, dtype=np.float64)
    m = np.asarray(mean, dtype=np.float64)
    v = np.asarray(variance, dtype=np.float64)
    if x64.shape[-1] != g.shape[0]:
        raise ShapeMismatchError(f"input {x64.shape} vs {g.shape[0]} channels of moments")
    return ((x64 - m) / np.sqrt(v + epsilon) * g + b).astype(np.float32)


def maxpool2d(x, pool, stride, padding="valid", pad=None):
    return _pool(x, pool, stride, padding, pad, mode="max")


def avgpool2d(x, pool, stride, padding="valid", pad=None):
    return _pool(x, pool, stride, padding, pad, mode="avg")


def _pool(x, pool, stride, padding, pad, mode):
    x = np.asarray(x)
    if x.ndim != 3:
        raise ShapeMismatchError(f"pooling needs a feature map, got {x.shape}")
    kh, kw = _pair(pool)
    sh, sw = _pair(stride)
    pads = _resolve_pads(*x.shape[:2], kh, kw, sh, sw, padding, pad)
    fill = -np.inf if mode == "max" else 0.0
    xp = _pad_hw(x.astype(np.float64), pads, value=fill)
    oh, ow = _out_hw(*xp.shape[:2], kh, kw, sh, sw)
    if oh < 1 or ow < 1:
        raise ShapeMismatchError(f"pool {kh}x{kw} larger than padded input {xp.shape[:2]}")
    if mode == "max":
        acc = np.full((oh, ow, x.shape[2]), -np.inf)
    else:
        acc = np.zeros((oh, ow, x.shape[2]))
        # average excludes padded cells: count real contributions per window
        ones = _pad_hw(np.ones_like(x, dtype=np.float64), pads, value=0.0)
        count = np.zeros((oh, ow, x.shape[2]))
    for u in range(kh):
        for v in range(kw):
            patch = xp[u : u + (oh - 1) * sh + 1 : sh, v : v + (ow - 1) * sw + 1 : sw]
            if mode == "max":
                np.maximum(acc, patch, out=acc)
            else:
                acc += patch
                count += ones[u : u + (oh - 1) * sh + 1 : sh, v : v + (ow - 1) * sw + 1 : sw]
    if mode == "avg":
        acc /= count
    return acc.astype(np.float32)


def global_avgpool(x):
    x = np.asarray(x)
    if x.ndim != 3:
        raise ShapeMismatchError(f"pooling needs a feature map, got {x.shape}")
    return x.astype(np.float64).mean(axis=(0, 1)).astype(np.float32)


def relu(x):
    return np.maximum(np.asarray(x), 0.0).astype(np.float32)


def relu6(x):
    return np.clip(np.asarray(x), 0.0, 6.0).astype(np.float32)


def softmax(logits):
    """Stable softmax over a flat vector, float64 result summing to 1."""
    z = np.asarray(logits, dtype=np.float64).reshape(-1)
    z = z - z.max()
    e = np.exp(z)
    return e / e.sum()


@dataclass
class Prediction:
    probs: np.ndarray
    class_index: int

    @property
    def confidence(self) -> float:
        return float(self.probs[self.class_index])


def forward(g: NetGraph, image: np.ndarray, check_finite: bool = True) -> Prediction:
    """Run one image through a weighted graph.

    Raises ShapeMismatchError naming the offending layer, and
    NonFiniteActivationError if any layer emits NaN or infinity.
    """
    validate_graph(g)
    expected = weight_shapes(g)
    missing = [lid for lid in expected if lid not in g.weights]
    if missing:
        raise ShapeMismatchError(f"graph is missing weights for {missing}")
    x = np.asarray(image, dtype=np.float32)
    if x.shape != tuple(g.input_shape):
        raise ShapeMismatchError(f"input {x.shape}, graph expects {tuple(g.input_shape)}")

    acts: dict[str, np.ndarray] = {}
    out = None
    for l in g.layers:
        ins = [acts[i] for i in l.input_ids]
        try:
            out = _apply(l, ins, g.weights.get(l.id), x)
        except ShapeMismatchError as e:
            raise ShapeMismatchError(f"layer {l.id!r}: {e}") from None
        if check_finite and not np.all(np.isfinite(out)):
            raise NonFiniteActivationError(f"layer {l.id!r} produced non-finite values")
        acts[l.id] = out
    probs = np.asarray(out, dtype=np.float64)
    return Prediction(probs=probs, class_index=int(np.argmax(probs)))


def _apply(l, ins, w, graph_input):
    kind, a = l.kind, l.attrs
    if kind == "input":
        return graph_input
    if kind == "conv2d":
        bias = w[1] if len(w) > 1 else None
        return conv2d(ins[0], w[0], bias, a["stride"], a["padding"], a.get("pad"))
    if kind == "depthwise_conv2d":
        bias = w[1] if len(w) > 1 else None
        return depthwise_conv2d(ins[0], w[0], bias, a["stride"], a["padding"], a.get("pad"))
    if kind == "dense":
        return dense(ins[0], w[0], w[1] if len(w) > 1 else None)
    if kind == "batchnorm":
        return batchnorm(ins[0], *w, epsilon=a["epsilon"])
    if kind == "maxpool2d":
        return maxpool2d(ins[0], a["pool"], a["stride"], a["padding"], a.get("pad"))
    if kind == "avgpool2d":
        return avgpool2d(ins[0], a["pool"], a["stride"], a["padding"], a.get("pad"))
    if kind == "global_avgpool":
        return global_avgpool(ins[0])
    if kind == "flatten":
        return np.asarray(ins[0]).reshape(-1)
    if kind == "relu":
        return relu(ins[0])
    if kind == "relu6":
        return relu6(ins[0])
    if kind == "add":
        if ins[0].shape != ins[1].shape:
            raise ShapeMismatchError(f"cannot add {ins[0].shape} to {ins[1].shape}")
        return (ins[0].astype(np.float64) + ins[1].astype(np.float64)).astype(np.float32)
    if kind == "dropout":
        return ins[0]  # inference mode: identity
    if kind == "softmax":
        return softmax(ins[0])
    raise ShapeMismatchError(f"no runtime for kind {kind!r}")
