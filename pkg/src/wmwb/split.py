"""Source-exclusive train/val/test splitting.

All windows of a recording land in the same subset (recordings, not
windows, are the unit of assignment), and fractions are balanced per
species by window count: files are visited in seeded shuffled order and
each goes to the subset whose share is currently furthest below target.
"""

from __future__ import annotations

import csv
import io
from dataclasses import dataclass, field

import numpy as np

from .annotation import Manifest
from .errors import BadFractionsError, EmptyManifestError
from .segment import clip_window_total

SUBSETS = ("train", "val", "test")
DEFAULT_FRACTIONS = (0.7, 0.2, 0.1)


@dataclass
class SplitRow:
    source_id: str
    species: str
    subset: str
    window_count: int


@dataclass
class SplitAssignment:
    seed: int
    fractions: tuple[float, float, float]
    rows: list[SplitRow] = field(default_factory=list)

    @property
    def assignment(self) -> dict[str, str]:
        return {r.source_id: r.subset for r in self.rows}

    def subset_sources(self, subset: str) -> list[str]:
        return [r.source_id for r in self.rows if r.subset == subset]

    def window_totals(self) -> dict[str, int]:
        totals = dict.fromkeys(SUBSETS, 0)
        for r in self.rows:
            totals[r.subset] += r.window_count
        return totals

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["source_id", "species", "subset", "window_count"])
        for r in self.rows:
            w.writerow([r.source_id, r.species, r.subset, r.window_count])
        return buf.getvalue()

    @classmethod
    def from_csv(cls, text: str, seed: int = -1, fractions=DEFAULT_FRACTIONS) -> "SplitAssignment":
        rows = []
        for rec in csv.DictReader(io.StringIO(text)):
            rows.append(
                SplitRow(
                    source_id=rec["source_id"],
                    species=rec["species"],
                    subset=rec["subset"],
                    window_count=int(rec["window_count"]),
                )
            )
        return cls(seed=seed, fractions=tuple(fractions), rows=rows)


def _check_fractions(fractions) -> tuple[float, float, float]:
    fr = tuple(float(f) for f in fractions)
    if len(fr) != 3 or any(f <= 0 for f in fr) or abs(sum(fr) - 1.0) > 1e-9:
        raise BadFractionsError(
            f"fractions must be three positive numbers summing to 1, got {fractions}"
        )
    return fr


def split_by_source(
    manifest: Manifest,
    fractions=DEFAULT_FRACTIONS,
    seed: int = 0,
    sample_rate: int = 22050,
) -> SplitAssignment:
    """Assign every recording to train/val/test.

    Deterministic in (manifest order, seed). Per species, each file's
    window count (what segmentation will emit) is the balancing weight;
    the guarantee is |assigned - target| below the largest single file's
    window count, since files are indivisible.
    """
    fr = _check_fractions(fractions)
    if not manifest.entries:
        raise EmptyManifestError("cannot split an empty manifest")

    rng = np.random.default_rng(seed)
    out = SplitAssignment(seed=seed, fractions=fr)
    for species, entries in sorted(manifest.by_species().items()):
        files = sorted(entries, key=lambda e: e.source_id)
        counts = {
            e.source_id: clip_window_total(e.regions, sample_rate) for e in files
        }
        total = sum(counts.values())
        order = rng.permutation(len(files))
        assigned = dict.fromkeys(SUBSETS, 0)
        for idx in order:
            e = files[idx]
            deficits = [
                fr[i] - assigned[s] / total for i, s in enumerate(SUBSETS)
            ]
            subset = SUBSETS[int(np.argmax(deficits))]
            assigned[subset] += counts[e.source_id]
            out.rows.append(
                SplitRow(
                    source_id=e.source_id,
                    species=species,
                    subset=subset,
                    window_count=counts[e.source_id],
                )
            )
    out.rows.sort(key=lambda r: (r.species, r.source_id))
    return out
