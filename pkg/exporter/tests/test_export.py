"""Exporter behavior: mapping closure, layout fidelity, parity fixtures."""

import numpy as np
import pytest
from tensorflow import keras

from wmwb import ShapeMismatchError, build_catalog, count_params, load_model, save_model
from wmwb_exporter import (
    ExportManifest,
    LayerMismatchError,
    MissingWeightsError,
    PARITY_TOLERANCE,
    check_padding,
    emit_fixtures,
    export,
    export_model,
    iter_fixtures,
    verify_parity,
)
from wmwb_exporter.cli import main

from stand_ins import HIDDEN, N_CLASSES, make_source

ARCHS = ("vgg16", "resnet50", "mobilenet_v2")


def manifest_for(arch, **kw):
    return ExportManifest(arch=arch, n_classes=N_CLASSES, hidden_width=HIDDEN, **kw)


# --- conversion and parity ---------------------------------------------------


@pytest.mark.parametrize("arch", ARCHS)
def test_param_count_matches_source_report(sources, arch):
    graph = export_model(sources[arch], manifest_for(arch))
    assert count_params(graph) == sources[arch].count_params()


@pytest.mark.parametrize("arch", ARCHS)
def test_parity_fixtures_reproduce_source_probabilities(sources, arch, tmp_path):
    graph = export_model(sources[arch], manifest_for(arch))
    emit_fixtures(sources[arch], tmp_path, count=5, seed=11)
    pairs = list(iter_fixtures(tmp_path))
    assert len(pairs) == 5
    for _, expected in pairs:
        assert expected.shape == (N_CLASSES,)
        assert np.ptp(expected) > 0.01  # informative, not uniform
        assert expected.max() < 0.99  # and not saturated
    diffs = verify_parity(graph, tmp_path)
    assert len(diffs) == 5
    assert max(diffs) <= PARITY_TOLERANCE


def test_export_is_lossless_for_weights(sources, tmp_path):
    model = sources["mobilenet_v2"]
    graph = export_model(model, manifest_for("mobilenet_v2"))
    out = tmp_path / "m.wmwb"
    save_model(out, graph)
    loaded = load_model(out)
    for spec in loaded.weighted_layers():
        source = [np.asarray(t, dtype=np.float32) for t in model.get_layer(spec.id).get_weights()]
        if spec.kind == "depthwise_conv2d":
            source[0] = source[0][..., 0]
        for got, want in zip(loaded.weights[spec.id], source):
            assert got.tobytes() == want.tobytes()


def test_export_writes_model_and_fixtures(sources, tmp_path):
    ckpt = tmp_path / "source.keras"
    sources["mobilenet_v2"].save(ckpt)
    out = tmp_path / "converted.wmwb"
    graph, fixture_dir = export(ckpt, manifest_for("mobilenet_v2"), out, fixtures=5, seed=3)
    assert out.exists()
    assert sorted(p.name for p in fixture_dir.glob("*.wmfi")) == [
        f"fixture_{i:02d}.wmfi" for i in range(5)
    ]
    reloaded = load_model(out)
    assert count_params(reloaded) == count_params(graph)
    assert max(verify_parity(reloaded, fixture_dir)) <= PARITY_TOLERANCE


def test_cli_end_to_end(sources, tmp_path, capsys):
    ckpt = tmp_path / "source.keras"
    sources["mobilenet_v2"].save(ckpt)
    out = tmp_path / "cli.wmwb"
    rc = main(
        [
            str(ckpt),
            str(out),
            "--arch",
            "mobilenet_v2",
            "--classes",
            str(N_CLASSES),
            "--hidden",
            str(HIDDEN),
            "--fixtures",
            "2",
        ]
    )
    captured = capsys.readouterr()
    assert rc == 0, captured.err
    assert out.exists()
    assert "params:" in captured.out
    assert "parity: max deviation" in captured.out


def test_cli_reports_errors_as_json(tmp_path, capsys):
    rc = main([str(tmp_path / "missing.keras"), str(tmp_path / "x.wmwb"),
               "--arch", "mobilenet_v2", "--classes", "4"])
    assert rc == 1
    err = capsys.readouterr().err.strip()
    assert err.startswith("{") and "error" in err


# --- mapping closure ---------------------------------------------------------


def _identity_mapping():
    g = build_catalog("mobilenet_v2", N_CLASSES, head="custom", hidden_width=HIDDEN)
    return {l.id: l.id for l in g.weighted_layers()}


def test_unmapped_target_layer_raises(sources):
    mapping = _identity_mapping()
    mapping.pop("head_fc")
    with pytest.raises(LayerMismatchError) as exc:
        export_model(sources["mobilenet_v2"], manifest_for("mobilenet_v2", mapping=mapping))
    assert "head_fc" in str(exc.value)


def test_unknown_target_in_mapping_raises(sources):
    mapping = {"no_such_layer": "Conv1"}
    with pytest.raises(LayerMismatchError) as exc:
        export_model(sources["mobilenet_v2"], manifest_for("mobilenet_v2", mapping=mapping))
    assert "no_such_layer" in str(exc.value)


def test_unwaived_source_layer_raises_then_waiver_clears():
    model = make_source("mobilenet_v2", seed=2)
    aux = keras.layers.Dense(3, name="aux_fc")(model.get_layer("avg_pool").output)
    twin = keras.Model(model.input, [model.output, aux])

    with pytest.raises(LayerMismatchError) as exc:
        export_model(twin, manifest_for("mobilenet_v2"))
    assert "aux_fc" in str(exc.value)

    graph = export_model(twin, manifest_for("mobilenet_v2", waived=("aux_fc",)))
    assert count_params(graph) == twin.count_params() - (1280 * 3 + 3)


def test_mapped_and_waived_overlap_raises(sources):
    with pytest.raises(LayerMismatchError) as exc:
        export_model(sources["mobilenet_v2"], manifest_for("mobilenet_v2", waived=("Conv1",)))
    assert "Conv1" in str(exc.value)


def test_mapped_source_layer_absent_raises(sources):
    mapping = _identity_mapping()
    mapping["head_fc"] = "not_in_checkpoint"
    with pytest.raises(LayerMismatchError) as exc:
        export_model(sources["mobilenet_v2"], manifest_for("mobilenet_v2", mapping=mapping))
    assert "not_in_checkpoint" in str(exc.value)


# --- tensor validation -------------------------------------------------------


def test_missing_bias_raises_missing_weights():
    model = make_source("mobilenet_v2", seed=3, head_bias=False)
    with pytest.raises(MissingWeightsError) as exc:
        export_model(model, manifest_for("mobilenet_v2"))
    assert "head_fc" in str(exc.value)


def test_hidden_width_disagreement_raises_shape_mismatch():
    model = make_source("mobilenet_v2", seed=4, hidden=32)
    with pytest.raises(ShapeMismatchError) as exc:
        export_model(model, manifest_for("mobilenet_v2"))  # manifest says HIDDEN
    assert "head_fc" in str(exc.value)


def test_padding_disagreement_aborts(sources):
    model = sources["mobilenet_v2"]
    graph = build_catalog("mobilenet_v2", N_CLASSES, head="custom", hidden_width=HIDDEN)
    mapping = {l.id: l.id for l in graph.weighted_layers()}
    check_padding(model, graph, mapping)  # stock conventions agree

    stride2 = next(
        l for l in graph.layers if l.kind == "depthwise_conv2d" and l.attrs.get("pad")
    )
    saved = stride2.attrs.pop("pad")
    with pytest.raises(LayerMismatchError) as exc:
        check_padding(model, graph, mapping)
    assert stride2.id in str(exc.value)

    stride2.attrs["pad"] = [[9, 9], [9, 9]]
    with pytest.raises(LayerMismatchError):
        check_padding(model, graph, mapping)
    stride2.attrs["pad"] = saved


# --- manifest files ----------------------------------------------------------


def test_manifest_round_trip(tmp_path):
    m = manifest_for("vgg16", waived=("aux",), mapping={"block1_conv1": "block1_conv1"})
    path = tmp_path / "m.json"
    m.save(path)
    again = ExportManifest.load(path)
    assert again == m


def test_manifest_rejects_unknown_keys():
    with pytest.raises(ValueError) as exc:
        ExportManifest.from_json('{"arch": "vgg16", "n_classes": 4, "typo": 1}')
    assert "typo" in str(exc.value)


def test_manifest_requires_arch_and_classes():
    with pytest.raises(ValueError):
        ExportManifest.from_json('{"arch": "vgg16"}')
