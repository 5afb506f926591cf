import numpy as np
import pytest

from wmwb.annotation import render_label_file, LabelRegion
from wmwb.audio import write_wav

from toy_net import tiny_graph


def make_tone(duration_s: float, freq: float, rate: int = 22050, amp: float = 0.5) -> np.ndarray:
    t = np.arange(round(duration_s * rate)) / rate
    return (amp * np.sin(2 * np.pi * freq * t)).astype(np.float32)


@pytest.fixture
def tiny_dataset(tmp_path):
    """Two-species tree of paired wav/label files, ~2-4 s each."""
    root = tmp_path / "data"
    spec = {
        "grus_grus": [
            ("gg_001", 3.0, 440.0, [(0.2, 1.1, "call"), (1.5, 2.8, "call")]),
            ("gg_002", 2.0, 520.0, [(0.1, 1.9, "call")]),
            ("gg_003", 4.0, 600.0, [(0.5, 3.5, "song")]),
        ],
        "crex_crex": [
            ("cc_101", 2.5, 880.0, [(0.0, 2.4, "song")]),
            ("cc_102", 3.5, 900.0, [(0.3, 1.2, "song"), (2.0, 3.4, "song")]),
        ],
    }
    for species, files in spec.items():
        d = root / species
        d.mkdir(parents=True)
        for source_id, dur, freq, regions in files:
            write_wav(d / f"{source_id}.wav", make_tone(dur, freq), 22050)
            (d / f"{source_id}.txt").write_text(
                render_label_file([LabelRegion(a, b, lab) for a, b, lab in regions]),
                encoding="utf-8",
            )
    return root


@pytest.fixture
def small_graph():
    return tiny_graph()
