"""Export manifest: what to convert and how layer names line up."""

from __future__ import annotations

import json
from dataclasses import asdict, dataclass
from pathlib import Path

_FIELDS = {
    "arch",
    "n_classes",
    "checkpoint",
    "head",
    "hidden_width",
    "dropout_rate",
    "mapping",
    "waived",
}


@dataclass
class ExportManifest:
    """Conversion recipe for one checkpoint.

    mapping goes target layer id -> source layer name; when omitted the
    identity mapping over the target's weighted layers is used, which fits
    checkpoints built from the stock Keras applications. Source layers that
    carry weights but feed nothing in the target must appear in waived.
    """

    arch: str
    n_classes: int
    checkpoint: str | None = None
    head: str = "custom"
    hidden_width: int = 256
    dropout_rate: float = 0.5
    mapping: dict[str, str] | None = None
    waived: tuple[str, ...] = ()

    def __post_init__(self):
        self.waived = tuple(self.waived)
        if self.mapping is not None:
            self.mapping = dict(self.mapping)

    def to_json(self) -> str:
        d = asdict(self)
        d["waived"] = list(self.waived)
        return json.dumps(d, indent=2, sort_keys=True) + "\n"

    @classmethod
    def from_json(cls, text: str) -> "ExportManifest":
        d = json.loads(text)
        if not isinstance(d, dict):
            raise ValueError("manifest must be a JSON object")
        unknown = sorted(set(d) - _FIELDS)
        if unknown:
            raise ValueError(f"unknown manifest keys: {unknown}")
        for key in ("arch", "n_classes"):
            if key not in d:
                raise ValueError(f"manifest is missing {key!r}")
        return cls(**d)

    def save(self, path: str | Path) -> None:
        Path(path).write_text(self.to_json(), encoding="utf-8")

    @classmethod
    def load(cls, path: str | Path) -> "ExportManifest":
        return cls.from_json(Path(path).read_text(encoding="utf-8"))
