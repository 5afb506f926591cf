"""Stand-in checkpoints: catalog architectures with perturbed random weights.

Real fine-tuned checkpoints are not available offline, so tests simulate
them. Freshly initialized models are useless for parity checks (dead relu
heads give exactly uniform probabilities, saturated heads give one-hot), so
every tensor is jittered and scaled until outputs are informative: distinct
per class but far from 0/1.
"""

import numpy as np
from tensorflow import keras

N_CLASSES = 8
HIDDEN = 64

_BASES = {
    "vgg16": keras.applications.VGG16,
    "resnet50": keras.applications.ResNet50,
    "mobilenet_v2": keras.applications.MobileNetV2,
}
# (body kernel scale, head kernel scale): keeps logits spread without
# saturating softmax; vgg16 has no batchnorm so its activations need a
# per-layer boost to survive 13 relus.
_SCALES = {"vgg16": (1.4, 1.0), "resnet50": (1.0, 0.5), "mobilenet_v2": (1.0, 2.0)}


def make_source(arch, n_classes=N_CLASSES, hidden=HIDDEN, seed=0, head_bias=True):
    base = _BASES[arch](weights=None, include_top=False, input_shape=(224, 224, 3))
    x = base.output
    if arch == "vgg16":
        x = keras.layers.Flatten(name="flatten")(x)
    else:
        x = keras.layers.GlobalAveragePooling2D(name="avg_pool")(x)
    x = keras.layers.Dense(hidden, activation="relu", name="head_fc", use_bias=head_bias)(x)
    x = keras.layers.Dropout(0.5, name="head_dropout")(x)
    out = keras.layers.Dense(n_classes, activation="softmax", name="predictions")(x)
    model = keras.Model(base.input, out)
    jitter_weights(model, arch, seed)
    return model


def jitter_weights(model, arch, seed):
    body_scale, head_scale = _SCALES[arch]
    rng = np.random.default_rng(seed)
    for layer in model.layers:
        w = layer.get_weights()
        if not w:
            continue
        if isinstance(layer, keras.layers.BatchNormalization):
            gamma, beta, mean, var = w
            w = [
                rng.uniform(0.7, 1.3, gamma.shape).astype(np.float32),
                rng.normal(0.0, 0.3, beta.shape).astype(np.float32),
                rng.normal(0.0, 0.2, mean.shape).astype(np.float32),
                rng.uniform(0.5, 1.5, var.shape).astype(np.float32),
            ]
        else:
            scale = head_scale if layer.name in ("head_fc", "predictions") else body_scale
            w = [
                t * scale if t.ndim > 1 else rng.normal(0.0, 0.2, t.shape).astype(np.float32)
                for t in w
            ]
        layer.set_weights(w)


def source_set():
    return {arch: make_source(arch) for arch in _BASES}
