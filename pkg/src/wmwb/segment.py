"""Cut annotated regions out of clips and slice them into fixed windows.

Region boundaries map to sample indices by flooring start_s * rate and
end_s * rate. The final window of a segment is padded by cyclic
repetition: the tail is followed by the segment's own opening samples, so
a window never contains silence that was not in the recording.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .annotation import LabelRegion
from .audio import SAMPLE_RATE, AudioClip
from .errors import EmptySegmentError, RegionOutOfBoundsError

WINDOW_SECONDS = 1.0


def window_length(sample_rate: int = SAMPLE_RATE) -> int:
    return round(WINDOW_SECONDS * sample_rate)


def window_count(segment_length: int, win: int) -> int:
    """Number of windows a segment yields: ceil(length / win)."""
    if segment_length <= 0:
        raise EmptySegmentError("segment has no samples")
    return -(-segment_length // win)


@dataclass
class Window:
    """One fixed-length window with its provenance."""

    samples: np.ndarray
    source_id: str
    region_index: int
    window_index: int

    @property
    def name(self) -> str:
        return f"{self.source_id}_r{self.region_index}_w{self.window_index}"


def cut_regions(clip: AudioClip, regions: list[LabelRegion]) -> list[np.ndarray]:
    """Slice each annotated region out of the clip, in annotation order.

    An end index may overshoot the clip by at most one sample (a rounding
    artifact of second-precision annotations) and is clamped; anything
    further out raises RegionOutOfBoundsError.
    """
    n = len(clip.samples)
    segments = []
    for i, r in enumerate(regions):
        start = math.floor(r.start_s * clip.sample_rate)
        end = math.floor(r.end_s * clip.sample_rate)
        if end > n + 1 or start >= n:
            raise RegionOutOfBoundsError(
                f"region {i} [{r.start_s:.6f}, {r.end_s:.6f}] maps to samples "
                f"[{start}, {end}) in a clip of {n}"
            )
        end = min(end, n)
        if end <= start:
            raise RegionOutOfBoundsError(
                f"region {i} collapsed to zero samples at rate {clip.sample_rate}"
            )
        segments.append(clip.samples[start:end])
    return segments


def windowize(segment: np.ndarray, win: int | None = None) -> list[np.ndarray]:
    """Split a segment into consecutive windows of exactly `win` samples.

    All but the last window are contiguous slices; the last wraps around
    to the start of the segment (cyclic repetition). A segment shorter
    than one window tiles itself as many times as needed.
    """
    if win is None:
        win = window_length()
    seg = np.asarray(segment)
    n = len(seg)
    count = window_count(n, win)
    out = [seg[i * win : (i + 1) * win] for i in range(count - 1)]
    tail = seg[(count - 1) * win :]
    need = count * win - n
    reps = np.tile(seg, -(-need // n))[:need] if need else seg[:0]
    out.append(np.concatenate([tail, reps]))
    return out


def segment_clip(clip: AudioClip, regions: list[LabelRegion]) -> list[Window]:
    """cut_regions + windowize with provenance indices attached."""
    win = window_length(clip.sample_rate)
    windows = []
    for ri, seg in enumerate(cut_regions(clip, regions)):
        for wi, samples in enumerate(windowize(seg, win)):
            windows.append(
                Window(
                    samples=samples,
                    source_id=clip.source_id,
                    region_index=ri,
                    window_index=wi,
                )
            )
    return windows


def clip_window_total(regions: list[LabelRegion], sample_rate: int, clip_samples: int | None = None) -> int:
    """Window count a clip will yield, from annotations alone.

    Uses the same floor/clamp arithmetic as cut_regions so split targets
    agree exactly with what segmentation emits. When clip_samples is None
    the regions are trusted to fit.
    """
    win = window_length(sample_rate)
    total = 0
    for r in regions:
        start = math.floor(r.start_s * sample_rate)
        end = math.floor(r.end_s * sample_rate)
        if clip_samples is not None:
            end = min(end, clip_samples)
        total += window_count(end - start, win)
    return total
