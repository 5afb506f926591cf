"""Label-track parsing and dataset manifest construction.

A label file is plain text, one region per line:

    start_seconds<TAB>end_seconds<TAB>label

Decimal points only (no locale commas), CRLF or LF endings, UTF-8. Columns
past the third are ignored, so exports with trailing tabs parse cleanly.
"""

from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass, field
from pathlib import Path

from .errors import (
    DuplicateSourceIdError,
    EmptyLabelFileError,
    InvertedIntervalError,
    MalformedLineError,
    OrphanAudioError,
    OrphanLabelsError,
)


@dataclass(frozen=True)
class LabelRegion:
    """One annotated time interval. Times in seconds, label verbatim."""

    start_s: float
    end_s: float
    label: str

    @property
    def duration_s(self) -> float:
        return self.end_s - self.start_s


def parse_label_file(text: str) -> list[LabelRegion]:
    """Parse label-track text into regions, in file order.

    Trailing blank lines are tolerated; a blank or short line anywhere else
    raises MalformedLineError with its 1-based line number. end <= start
    raises InvertedIntervalError.
    """
    lines = text.splitlines()
    while lines and not lines[-1].strip():
        lines.pop()
    regions: list[LabelRegion] = []
    for line_no, line in enumerate(lines, start=1):
        cols = line.split("\t")
        if len(cols) < 3:
            raise MalformedLineError(line_no, f"expected 3 tab-separated columns, got {len(cols)}")
        try:
            start = float(cols[0])
            end = float(cols[1])
        except ValueError:
            raise MalformedLineError(line_no, f"unparseable time in {cols[0]!r}/{cols[1]!r}") from None
        if not (math.isfinite(start) and math.isfinite(end)):
            raise MalformedLineError(line_no, "times must be finite")
        if start < 0:
            raise MalformedLineError(line_no, f"negative start time {start}")
        if end <= start:
            raise InvertedIntervalError(line_no, f"end {end} not after start {start}")
        regions.append(LabelRegion(start_s=start, end_s=end, label=cols[2]))
    return regions


def render_label_file(regions: list[LabelRegion]) -> str:
    """Inverse of parse_label_file, times at microsecond precision."""
    out = [f"{r.start_s:.6f}\t{r.end_s:.6f}\t{r.label}" for r in regions]
    return "".join(line + "\n" for line in out)


@dataclass
class ManifestEntry:
    """One recording: paired audio and label files under a species folder."""

    source_id: str
    species: str
    sound_type: str
    regions: list[LabelRegion]
    audio_path: Path
    label_path: Path

    @property
    def n_regions(self) -> int:
        return len(self.regions)

    @property
    def total_seconds(self) -> float:
        return sum(r.duration_s for r in self.regions)


@dataclass
class Manifest:
    root: Path
    entries: list[ManifestEntry] = field(default_factory=list)

    @property
    def species(self) -> list[str]:
        return sorted({e.species for e in self.entries})

    def by_species(self) -> dict[str, list[ManifestEntry]]:
        out: dict[str, list[ManifestEntry]] = {}
        for e in self.entries:
            out.setdefault(e.species, []).append(e)
        return out

    def summary_rows(self) -> list[dict]:
        """Per-species rows: annotated seconds, region count, file count."""
        rows = []
        for species, entries in sorted(self.by_species().items()):
            rows.append(
                {
                    "species": species,
                    "files": len(entries),
                    "regions": sum(e.n_regions for e in entries),
                    "total_seconds": sum(e.total_seconds for e in entries),
                    "sound_types": "+".join(
                        sorted({t for e in entries for t in e.sound_type.split("+") if t})
                    ),
                }
            )
        return rows

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["source_id", "species", "sound_type", "n_regions", "total_seconds"])
        for e in self.entries:
            w.writerow(
                [e.source_id, e.species, e.sound_type, e.n_regions, f"{e.total_seconds:.6f}"]
            )
        return buf.getvalue()


def build_manifest(root: str | Path) -> Manifest:
    """Walk `root`/<species>/ pairing audio with same-stem label files.

    Raises DuplicateSourceIdError, OrphanAudioError, or OrphanLabelsError
    listing every offending path; label parse errors propagate with the
    file path prefixed.
    """
    root = Path(root)
    pairs: list[tuple[str, str, Path, Path]] = []
    orphan_audio: list[Path] = []
    orphan_labels: list[Path] = []
    seen: dict[str, Path] = {}
    duplicates: list[str] = []

    for species_dir in sorted(p for p in root.iterdir() if p.is_dir()):
        wavs = {p.stem: p for p in sorted(species_dir.glob("*.wav"))}
        txts = {p.stem: p for p in sorted(species_dir.glob("*.txt"))}
        for stem, wav in wavs.items():
            if stem not in txts:
                orphan_audio.append(wav)
                continue
            if stem in seen:
                duplicates.append(f"{stem} ({seen[stem]} and {wav})")
            else:
                seen[stem] = wav
            pairs.append((stem, species_dir.name, wav, txts[stem]))
        orphan_labels.extend(txts[stem] for stem in sorted(set(txts) - set(wavs)))

    if duplicates:
        raise DuplicateSourceIdError("duplicate source ids: " + "; ".join(sorted(duplicates)))
    if orphan_audio:
        raise OrphanAudioError(
            "audio without labels: " + ", ".join(str(p) for p in sorted(orphan_audio))
        )
    if orphan_labels:
        raise OrphanLabelsError(
            "labels without audio: " + ", ".join(str(p) for p in sorted(orphan_labels))
        )

    entries = []
    for stem, species, wav, txt in pairs:
        try:
            regions = parse_label_file(txt.read_text(encoding="utf-8"))
        except (MalformedLineError, InvertedIntervalError) as e:
            raise type(e)(e.line_no, e.detail, path=txt) from None
        if not regions:
            raise EmptyLabelFileError(f"{txt}: no regions")
        sound_type = "+".join(sorted({r.label for r in regions}))
        entries.append(
            ManifestEntry(
                source_id=stem,
                species=species,
                sound_type=sound_type,
                regions=regions,
                audio_path=wav,
                label_path=txt,
            )
        )
    entries.sort(key=lambda e: (e.species, e.source_id))
    return Manifest(root=root, entries=entries)
