"""Pipeline configuration: INI file in, dataclass out, full dump back.

Every knob has a default; a config file only needs the keys it changes.
"""

from __future__ import annotations

import configparser
import io
from dataclasses import dataclass, field
from pathlib import Path

from .errors import WmwbError
from .features import FeatureConfig
from .split import DEFAULT_FRACTIONS


@dataclass
class PipelineConfig:
    features: FeatureConfig = field(default_factory=FeatureConfig)
    fractions: tuple[float, float, float] = DEFAULT_FRACTIONS
    seed: int = 0
    data_root: str = "data"
    output_dir: str = "out"
    model_path: str = "model.wmwb"
    jobs: int = 0  # 0 = one worker per CPU

    def dump(self) -> str:
        """Render the complete configuration, defaults included."""
        cp = configparser.ConfigParser()
        f = self.features
        cp["features"] = {
            "sample_rate": str(f.sample_rate),
            "fft_size": str(f.fft_size),
            "hop": str(f.hop),
            "mel_bands": str(f.mel_bands),
            "f_min": repr(f.f_min),
            "f_max": repr(f.f_max),
            "db_floor": repr(f.db_floor),
        }
        cp["split"] = {
            "train": repr(self.fractions[0]),
            "val": repr(self.fractions[1]),
            "test": repr(self.fractions[2]),
            "seed": str(self.seed),
        }
        cp["paths"] = {
            "data_root": self.data_root,
            "output_dir": self.output_dir,
            "model": self.model_path,
        }
        cp["run"] = {"jobs": str(self.jobs)}
        buf = io.StringIO()
        cp.write(buf)
        return buf.getvalue()


def load_config(path: str | Path | None = None) -> PipelineConfig:
    cfg = PipelineConfig()
    if path is None:
        return cfg
    cp = configparser.ConfigParser()
    read = cp.read(Path(path))
    if not read:
        raise WmwbError(f"config file not found: {path}")
    try:
        feat = {}
        if cp.has_section("features"):
            s = cp["features"]
            for key, conv in [
                ("sample_rate", int), ("fft_size", int), ("hop", int),
                ("mel_bands", int), ("f_min", float), ("f_max", float),
                ("db_floor", float),
            ]:
                if key in s:
                    feat[key] = conv(s[key])
        cfg.features = FeatureConfig(**feat)
        if cp.has_section("split"):
            s = cp["split"]
            cfg.fractions = (
                s.getfloat("train", cfg.fractions[0]),
                s.getfloat("val", cfg.fractions[1]),
                s.getfloat("test", cfg.fractions[2]),
            )
            cfg.seed = s.getint("seed", cfg.seed)
        if cp.has_section("paths"):
            s = cp["paths"]
            cfg.data_root = s.get("data_root", cfg.data_root)
            cfg.output_dir = s.get("output_dir", cfg.output_dir)
            cfg.model_path = s.get("model", cfg.model_path)
        if cp.has_section("run"):
            cfg.jobs = cp["run"].getint("jobs", cfg.jobs)
    except ValueError as e:
        raise WmwbError(f"bad value in {path}: {e}") from None
    return cfg
