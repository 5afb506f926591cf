"""Layer ops against brute-force oracles.

Each gold_* function is a direct transcription of the operation's
definition: explicit loops, no vectorization, float64 throughout. The
implementations must agree within 1e-5 relative error across randomized
shapes, strides, and padding modes.
"""

import numpy as np
import pytest

from toy_net import tiny_graph
from wmwb.errors import NonFiniteActivationError, ShapeMismatchError
from wmwb.netgraph import LayerSpec, NetGraph, infer_shapes, init_random
from wmwb.ops import (
    avgpool2d,
    batchnorm,
    conv2d,
    dense,
    depthwise_conv2d,
    forward,
    global_avgpool,
    maxpool2d,
    relu,
    relu6,
    same_pads,
    softmax,
)

RTOL = 1e-5
ATOL = 1e-6


def gold_pad(x, pads, value=0.0):
    (pt, pb), (pl, pr) = pads
    h, w, c = x.shape
    out = np.full((h + pt + pb, w + pl + pr, c), value, dtype=np.float64)
    out[pt : pt + h, pl : pl + w] = x
    return out


def gold_same_pads(size, k, stride):
    out = int(np.ceil(size / stride))
    total = max((out - 1) * stride + k - size, 0)
    return total // 2, total - total // 2


def gold_conv2d(x, kernel, bias, stride, padding, pad=None):
    x = np.asarray(x, dtype=np.float64)
    kh, kw, cin, cout = kernel.shape
    sh, sw = stride
    if pad is not None:
        x = gold_pad(x, pad)
    if padding == "same":
        ph = gold_same_pads(x.shape[0], kh, sh)
        pw = gold_same_pads(x.shape[1], kw, sw)
        x = gold_pad(x, (ph, pw))
    oh = (x.shape[0] - kh) // sh + 1
    ow = (x.shape[1] - kw) // sw + 1
    out = np.zeros((oh, ow, cout))
    for i in range(oh):
        for j in range(ow):
            for o in range(cout):
                s = 0.0
                for u in range(kh):
                    for v in range(kw):
                        for c in range(cin):
                            s += x[i * sh + u, j * sw + v, c] * kernel[u, v, c, o]
                out[i, j, o] = s + (bias[o] if bias is not None else 0.0)
    return out


def gold_depthwise(x, kernel, bias, stride, padding, pad=None):
    x = np.asarray(x, dtype=np.float64)
    kh, kw, cin = kernel.shape
    sh, sw = stride
    if pad is not None:
        x = gold_pad(x, pad)
    if padding == "same":
        ph = gold_same_pads(x.shape[0], kh, sh)
        pw = gold_same_pads(x.shape[1], kw, sw)
        x = gold_pad(x, (ph, pw))
    oh = (x.shape[0] - kh) // sh + 1
    ow = (x.shape[1] - kw) // sw + 1
    out = np.zeros((oh, ow, cin))
    for i in range(oh):
        for j in range(ow):
            for c in range(cin):
                s = 0.0
                for u in range(kh):
                    for v in range(kw):
                        s += x[i * sh + u, j * sw + v, c] * kernel[u, v, c]
                out[i, j, c] = s + (bias[c] if bias is not None else 0.0)
    return out


def gold_pool(x, pool, stride, padding, mode):
    x = np.asarray(x, dtype=np.float64)
    kh, kw = pool
    sh, sw = stride
    pads = ((0, 0), (0, 0))
    if padding == "same":
        pads = (gold_same_pads(x.shape[0], kh, sh), gold_same_pads(x.shape[1], kw, sw))
    h, w, c = x.shape
    (pt, _), (pl, _) = pads
    ph, pw = h + sum(pads[0]), w + sum(pads[1])
    oh = (ph - kh) // sh + 1
    ow = (pw - kw) // sw + 1
    out = np.zeros((oh, ow, c))
    for i in range(oh):
        for j in range(ow):
            for ch in range(c):
                vals = []
                for u in range(kh):
                    for v in range(kw):
                        yy = i * sh + u - pt
                        xx = j * sw + v - pl
                        if 0 <= yy < h and 0 <= xx < w:
                            vals.append(x[yy, xx, ch])
                out[i, j, ch] = max(vals) if mode == "max" else sum(vals) / len(vals)
    return out


def gold_batchnorm(x, gamma, beta, mean, var, eps):
    x = np.asarray(x, dtype=np.float64)
    out = np.empty_like(x)
    for c in range(x.shape[-1]):
        out[..., c] = (x[..., c] - mean[c]) / np.sqrt(var[c] + eps) * gamma[c] + beta[c]
    return out


def gold_dense(x, w, b):
    x = np.asarray(x, dtype=np.float64).reshape(-1)
    out = np.zeros(w.shape[1])
    for o in range(w.shape[1]):
        s = 0.0
        for i in range(w.shape[0]):
            s += x[i] * w[i, o]
        out[o] = s + (b[o] if b is not None else 0.0)
    return out


def gold_softmax(z):
    z = np.asarray(z, dtype=np.float64)
    e = np.exp(z - z.max())
    return e / e.sum()


def _random_case(rng):
    h = int(rng.integers(3, 10))
    w = int(rng.integers(3, 10))
    cin = int(rng.integers(1, 5))
    cout = int(rng.integers(1, 5))
    kh = int(rng.integers(1, min(h, 4) + 1))
    kw = int(rng.integers(1, min(w, 4) + 1))
    stride = (int(rng.integers(1, 3)), int(rng.integers(1, 3)))
    padding = "same" if rng.random() < 0.5 else "valid"
    x = rng.standard_normal((h, w, cin)).astype(np.float32)
    return x, cin, cout, (kh, kw), stride, padding


def test_same_pads_matches_oracle():
    rng = np.random.default_rng(0)
    for _ in range(200):
        size = int(rng.integers(1, 50))
        k = int(rng.integers(1, 8))
        s = int(rng.integers(1, 4))
        assert same_pads(size, k, s) == gold_same_pads(size, k, s)


@pytest.mark.parametrize("seed", range(40))
def test_conv2d_matches_oracle(seed):
    rng = np.random.default_rng(1000 + seed)
    x, cin, cout, (kh, kw), stride, padding = _random_case(rng)
    kernel = rng.standard_normal((kh, kw, cin, cout))
    bias = rng.standard_normal(cout) if rng.random() < 0.7 else None
    got = conv2d(x, kernel, bias, stride, padding)
    want = gold_conv2d(x, kernel, bias, stride, padding)
    assert got.shape == want.shape
    np.testing.assert_allclose(got, want, rtol=RTOL, atol=ATOL)


@pytest.mark.parametrize("seed", range(25))
def test_depthwise_matches_oracle(seed):
    rng = np.random.default_rng(2000 + seed)
    x, cin, _, (kh, kw), stride, padding = _random_case(rng)
    kernel = rng.standard_normal((kh, kw, cin))
    bias = rng.standard_normal(cin) if rng.random() < 0.5 else None
    got = depthwise_conv2d(x, kernel, bias, stride, padding)
    want = gold_depthwise(x, kernel, bias, stride, padding)
    np.testing.assert_allclose(got, want, rtol=RTOL, atol=ATOL)


def test_conv2d_explicit_pad_matches_oracle():
    rng = np.random.default_rng(77)
    x = rng.standard_normal((9, 9, 2)).astype(np.float32)
    kernel = rng.standard_normal((7, 7, 2, 3))
    pad = ((3, 3), (3, 3))
    got = conv2d(x, kernel, None, (2, 2), "valid", pad=pad)
    want = gold_conv2d(x, kernel, None, (2, 2), "valid", pad=pad)
    np.testing.assert_allclose(got, want, rtol=RTOL, atol=ATOL)
    # explicit (0,1) pad + valid equals same for even sizes at stride 2
    x2 = rng.standard_normal((8, 8, 2)).astype(np.float32)
    k2 = rng.standard_normal((3, 3, 2))
    a = depthwise_conv2d(x2, k2, None, (2, 2), "valid", pad=((0, 1), (0, 1)))
    b = depthwise_conv2d(x2, k2, None, (2, 2), "same")
    np.testing.assert_allclose(a, b, rtol=RTOL, atol=ATOL)


@pytest.mark.parametrize("seed", range(20))
@pytest.mark.parametrize("mode", ["max", "avg"])
def test_pool_matches_oracle(mode, seed):
    rng = np.random.default_rng(3000 + seed)
    h = int(rng.integers(3, 11))
    w = int(rng.integers(3, 11))
    c = int(rng.integers(1, 4))
    kh = int(rng.integers(1, min(h, 3) + 1))
    kw = int(rng.integers(1, min(w, 3) + 1))
    stride = (int(rng.integers(1, 4)), int(rng.integers(1, 4)))
    padding = "same" if rng.random() < 0.5 else "valid"
    x = rng.standard_normal((h, w, c)).astype(np.float32)
    fn = maxpool2d if mode == "max" else avgpool2d
    got = fn(x, (kh, kw), stride, padding)
    want = gold_pool(x, (kh, kw), stride, padding, mode)
    np.testing.assert_allclose(got, want, rtol=RTOL, atol=ATOL)


def test_avgpool_same_excludes_padding_from_denominator():
    # 2x2 input of ones, 2x2 pool stride 1, same: every output must be 1.0
    x = np.ones((2, 2, 1), dtype=np.float32)
    out = avgpool2d(x, (2, 2), (1, 1), "same")
    np.testing.assert_allclose(out, 1.0)


def test_maxpool_negative_values_with_padding():
    # all-negative input: padded cells must never win the max
    x = -np.abs(np.random.default_rng(4).standard_normal((4, 4, 2))).astype(np.float32) - 1.0
    out = maxpool2d(x, (3, 3), (2, 2), "same")
    assert out.max() < 0


@pytest.mark.parametrize("seed", range(10))
def test_batchnorm_matches_oracle(seed):
    rng = np.random.default_rng(4000 + seed)
    c = int(rng.integers(1, 6))
    x = rng.standard_normal((5, 4, c)).astype(np.float32)
    gamma = rng.standard_normal(c)
    beta = rng.standard_normal(c)
    mean = rng.standard_normal(c)
    var = rng.random(c) + 0.1
    for eps in (1e-3, 1.001e-5):
        got = batchnorm(x, gamma, beta, mean, var, eps)
        want = gold_batchnorm(x, gamma, beta, mean, var, eps)
        np.testing.assert_allclose(got, want, rtol=RTOL, atol=ATOL)


@pytest.mark.parametrize("seed", range(10))
def test_dense_matches_oracle(seed):
    rng = np.random.default_rng(5000 + seed)
    n_in = int(rng.integers(1, 40))
    n_out = int(rng.integers(1, 12))
    x = rng.standard_normal(n_in).astype(np.float32)
    w = rng.standard_normal((n_in, n_out))
    b = rng.standard_normal(n_out) if rng.random() < 0.7 else None
    np.testing.assert_allclose(dense(x, w, b), gold_dense(x, w, b), rtol=RTOL, atol=ATOL)


def test_activations():
    x = np.array([-3.0, -0.5, 0.0, 2.5, 7.1], dtype=np.float32)
    np.testing.assert_array_equal(relu(x), np.array([0, 0, 0, 2.5, 7.1], dtype=np.float32))
    np.testing.assert_array_equal(relu6(x), np.array([0, 0, 0, 2.5, 6.0], dtype=np.float32))


def test_global_avgpool():
    rng = np.random.default_rng(6)
    x = rng.standard_normal((5, 7, 3)).astype(np.float32)
    np.testing.assert_allclose(
        global_avgpool(x), x.astype(np.float64).mean(axis=(0, 1)), rtol=RTOL, atol=ATOL
    )


@pytest.mark.parametrize("seed", range(10))
def test_softmax_matches_oracle_and_sums_to_one(seed):
    rng = np.random.default_rng(6000 + seed)
    z = rng.standard_normal(int(rng.integers(2, 30))) * 10
    p = softmax(z)
    np.testing.assert_allclose(p, gold_softmax(z), rtol=1e-12)
    assert abs(p.sum() - 1.0) < 1e-6
    assert p.min() > 0


def test_softmax_extreme_logits_stay_finite():
    p = softmax(np.array([1e4, -1e4, 0.0]))
    assert np.all(np.isfinite(p))
    assert p[0] == pytest.approx(1.0)


def test_shape_mismatch_errors():
    rng = np.random.default_rng(7)
    with pytest.raises(ShapeMismatchError):
        conv2d(rng.standard_normal((5, 5, 3)), rng.standard_normal((3, 3, 4, 2)))
    with pytest.raises(ShapeMismatchError):
        dense(rng.standard_normal(5), rng.standard_normal((6, 2)))
    with pytest.raises(ShapeMismatchError):
        batchnorm(rng.standard_normal((3, 3, 2)), *[np.ones(3)] * 4, epsilon=1e-3)
    with pytest.raises(ShapeMismatchError):
        conv2d(rng.standard_normal((2, 2, 1)), rng.standard_normal((3, 3, 1, 1)),
               padding="valid")


# --- forward pass ----------------------------------------------------------------

def test_forward_matches_layerwise_oracle(small_graph):
    rng = np.random.default_rng(8)
    img = rng.random((8, 8, 3)).astype(np.float32)
    w = small_graph.weights
    x = gold_conv2d(img, w["c1"][0].astype(np.float64), w["c1"][1], (1, 1), "same")
    x = gold_batchnorm(x, *[t.astype(np.float64) for t in w["bn1"]], eps=1e-3)
    x = np.maximum(x, 0)
    y = gold_conv2d(x, w["c2"][0].astype(np.float64), w["c2"][1], (1, 1), "same")
    x = np.clip(x + y, 0, 6)
    x = gold_depthwise(x, w["dw"][0].astype(np.float64), None, (2, 2), "same")
    x = gold_pool(x, (2, 2), (2, 2), "valid", "max")
    x = x.mean(axis=(0, 1))
    x = np.maximum(gold_dense(x, w["fc"][0].astype(np.float64), w["fc"][1]), 0)
    logits = gold_dense(x, w["out"][0].astype(np.float64), w["out"][1])
    want = gold_softmax(logits)

    pred = forward(small_graph, img)
    np.testing.assert_allclose(pred.probs, want, rtol=1e-4, atol=1e-6)
    assert pred.class_index == int(np.argmax(want))
    assert abs(pred.probs.sum() - 1.0) < 1e-6


def test_forward_deterministic(small_graph):
    rng = np.random.default_rng(9)
    img = rng.random((8, 8, 3)).astype(np.float32)
    a = forward(small_graph, img)
    b = forward(small_graph, img)
    np.testing.assert_array_equal(a.probs, b.probs)


def test_forward_shape_errors(small_graph):
    with pytest.raises(ShapeMismatchError):
        forward(small_graph, np.zeros((9, 9, 3), dtype=np.float32))
    unweighted = NetGraph(
        layers=list(small_graph.layers), input_shape=small_graph.input_shape
    )
    with pytest.raises(ShapeMismatchError):
        forward(unweighted, np.zeros((8, 8, 3), dtype=np.float32))


def test_forward_flags_nonfinite(small_graph):
    g = tiny_graph()
    g.weights["fc"][1][0] = np.float32(np.inf)  # poisoned checkpoint weight
    img = np.full((8, 8, 3), 10.0, dtype=np.float32)
    with pytest.raises(NonFiniteActivationError) as exc:
        forward(g, img)
    assert "fc" in str(exc.value)


def test_forward_names_offending_layer(small_graph):
    g = tiny_graph()
    g.weights["c2"][0] = np.zeros((3, 3, 6, 5), dtype=np.float32)  # wrong cout
    with pytest.raises(ShapeMismatchError):
        forward(g, np.zeros((8, 8, 3), dtype=np.float32))


def test_dropout_is_identity_at_inference(small_graph):
    rng = np.random.default_rng(10)
    img = rng.random((8, 8, 3)).astype(np.float32)
    with_do = forward(small_graph, img).probs
    g = tiny_graph()
    g.layers = [l for l in g.layers]
    for l in g.layers:
        if l.kind == "dropout":
            l.attrs["rate"] = 0.9
    np.testing.assert_array_equal(forward(g, img).probs, with_do)


def test_forward_shapes_agree_with_inference(small_graph):
    # run once, then confirm every activation matches infer_shapes
    from wmwb import ops

    shapes = infer_shapes(small_graph)
    rng = np.random.default_rng(11)
    img = rng.random((8, 8, 3)).astype(np.float32)
    acts = {}
    x = None
    for l in small_graph.layers:
        ins = [acts[i] for i in l.input_ids]
        x = ops._apply(l, ins, small_graph.weights.get(l.id), img)
        acts[l.id] = x
        assert tuple(np.asarray(x).shape) == shapes[l.id], l.id
