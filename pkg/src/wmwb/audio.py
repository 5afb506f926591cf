"""WAV decode/encode and resampling to the pipeline rate.

Supported encodings: PCM 8/16/24-bit (format tag 1) and IEEE float32
(format tag 3). Everything decodes to float32 in [-1.0, 1.0]:

    8-bit  unsigned: (x - 128) / 128
    16-bit signed:   x / 32768
    24-bit signed:   x / 2**23
    float32:         clipped to [-1, 1]

The divisors are powers of two, so 16- and 24-bit decode is exact in
float32 and a decode/encode round trip at matching depth is bit-stable.
"""

from __future__ import annotations

import functools
import math
import struct
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from scipy.signal import firwin, resample_poly

from .errors import (
    EmptyInputError,
    MalformedHeaderError,
    TruncatedDataError,
    UnsupportedEncodingError,
)

SAMPLE_RATE = 22050
"""Pipeline sample rate. One analysis window is exactly this many samples."""

_PCM_TAG = 1
_FLOAT_TAG = 3


@dataclass
class DecodedWav:
    """Raw decode result, before mono mixdown and resampling.

    samples has shape (n_frames, n_channels), float32 in [-1, 1].
    """

    samples: np.ndarray
    sample_rate: int
    channel_count: int

    @property
    def n_frames(self) -> int:
        return self.samples.shape[0]


@dataclass
class AudioClip:
    """Mono clip at a known rate, ready for segmentation."""

    samples: np.ndarray
    sample_rate: int
    source_id: str = ""

    @property
    def duration_s(self) -> float:
        return len(self.samples) / self.sample_rate


def read_wav(data: bytes) -> DecodedWav:
    """Decode a RIFF/WAVE byte string.

    Raises MalformedHeaderError, UnsupportedEncodingError, or
    TruncatedDataError per the failure; never returns partial audio.
    """
    if len(data) < 12:
        raise MalformedHeaderError("file shorter than a RIFF header")
    if data[0:4] != b"RIFF" or data[8:12] != b"WAVE":
        raise MalformedHeaderError("not a RIFF/WAVE container")

    fmt = None
    payload = None
    pos = 12
    while pos + 8 <= len(data):
        chunk_id = data[pos : pos + 4]
        (chunk_size,) = struct.unpack_from("<I", data, pos + 4)
        body_start = pos + 8
        if chunk_id == b"fmt ":
            if chunk_size < 16 or body_start + 16 > len(data):
                raise MalformedHeaderError("fmt chunk too short")
            fmt = struct.unpack_from("<HHIIHH", data, body_start)
        elif chunk_id == b"data":
            if body_start + chunk_size > len(data):
                raise TruncatedDataError(
                    f"data chunk declares {chunk_size} bytes, "
                    f"{len(data) - body_start} available"
                )
            payload = data[body_start : body_start + chunk_size]
        # chunks are word-aligned: odd sizes carry a pad byte
        pos = body_start + chunk_size + (chunk_size & 1)

    if fmt is None:
        raise MalformedHeaderError("missing fmt chunk")
    if payload is None:
        raise MalformedHeaderError("missing data chunk")

    audio_format, channels, sample_rate, _byte_rate, block_align, bits = fmt
    if channels < 1:
        raise MalformedHeaderError("channel count must be >= 1")
    if sample_rate < 1:
        raise MalformedHeaderError("sample rate must be >= 1")

    if audio_format == _PCM_TAG and bits == 16:
        raw = np.frombuffer(payload[: len(payload) // 2 * 2], dtype="<i2")
        samples = raw.astype(np.float32) / 32768.0
    elif audio_format == _PCM_TAG and bits == 8:
        raw = np.frombuffer(payload, dtype=np.uint8)
        samples = (raw.astype(np.float32) - 128.0) / 128.0
    elif audio_format == _PCM_TAG and bits == 24:
        usable = len(payload) // 3 * 3
        b = np.frombuffer(payload[:usable], dtype=np.uint8).reshape(-1, 3)
        # little-endian 24-bit two's complement, sign-extended via int32
        as_int = (
            b[:, 0].astype(np.int32)
            | (b[:, 1].astype(np.int32) << 8)
            | (b[:, 2].astype(np.int32) << 16)
        )
        as_int = np.where(as_int >= 1 << 23, as_int - (1 << 24), as_int)
        samples = as_int.astype(np.float32) / float(1 << 23)
    elif audio_format == _FLOAT_TAG and bits == 32:
        raw = np.frombuffer(payload[: len(payload) // 4 * 4], dtype="<f4")
        samples = np.clip(raw, -1.0, 1.0).astype(np.float32)
    else:
        raise UnsupportedEncodingError(
            f"format tag {audio_format} at {bits} bits per sample"
        )

    if block_align != channels * (bits // 8):
        raise MalformedHeaderError(
            f"block align {block_align} inconsistent with "
            f"{channels} channels at {bits} bits"
        )

    n_frames = len(samples) // channels
    samples = samples[: n_frames * channels].reshape(n_frames, channels)
    return DecodedWav(samples=samples, sample_rate=sample_rate, channel_count=channels)


def read_wav_file(path: str | Path) -> DecodedWav:
    return read_wav(Path(path).read_bytes())


@functools.lru_cache(maxsize=None)
def _resample_filter(up: int, down: int) -> np.ndarray:
    """Windowed-sinc lowpass for a rational rate change.

    64 taps per polyphase branch, Kaiser beta 8.6, cutoff at the tighter
    of the two Nyquist rates. Scaled by `up` because resample_poly applies
    a caller-supplied array as the filter verbatim.
    """
    m = max(up, down)
    taps = firwin(64 * m + 1, 1.0 / m, window=("kaiser", 8.6))
    return taps * up


def to_mono_resample(
    raw: DecodedWav, target_rate: int = SAMPLE_RATE, source_id: str = ""
) -> AudioClip:
    """Mix down to mono (mean across channels) and resample.

    Output length is ceil(n * target / native); a clip never loses more
    than one output sample of duration. Values are clipped to [-1, 1]
    after filtering (the lowpass can overshoot on hard transients).
    """
    if raw.n_frames == 0:
        raise EmptyInputError("no audio frames to convert")
    mono = raw.samples.astype(np.float64).mean(axis=1)
    if raw.sample_rate != target_rate:
        g = math.gcd(target_rate, raw.sample_rate)
        up, down = target_rate // g, raw.sample_rate // g
        mono = resample_poly(
            mono, up, down, window=_resample_filter(up, down), padtype="mean"
        )
    out = np.clip(mono, -1.0, 1.0).astype(np.float32)
    return AudioClip(samples=out, sample_rate=target_rate, source_id=source_id)


def load_clip(path: str | Path, target_rate: int = SAMPLE_RATE) -> AudioClip:
    """Read a wav file and convert it to a mono pipeline-rate clip."""
    path = Path(path)
    return to_mono_resample(read_wav_file(path), target_rate, source_id=path.stem)


def write_wav_bytes(samples: np.ndarray, sample_rate: int, bits: int = 16) -> bytes:
    """Encode mono or (n, channels) float samples as a PCM wav byte string."""
    if bits != 16:
        raise UnsupportedEncodingError(f"writer only emits 16-bit PCM, got {bits}")
    arr = np.asarray(samples, dtype=np.float64)
    if arr.ndim == 1:
        arr = arr[:, None]
    if arr.ndim != 2:
        raise EmptyInputError("samples must be 1-D or (frames, channels)")
    n_frames, channels = arr.shape
    if n_frames == 0:
        raise EmptyInputError("refusing to write a zero-frame wav")
    pcm = np.clip(np.round(arr * 32768.0), -32768, 32767).astype("<i2")
    payload = pcm.tobytes()
    block_align = channels * 2
    header = b"RIFF" + struct.pack("<I", 36 + len(payload)) + b"WAVE"
    header += b"fmt " + struct.pack(
        "<IHHIIHH",
        16,
        _PCM_TAG,
        channels,
        sample_rate,
        sample_rate * block_align,
        block_align,
        16,
    )
    header += b"data" + struct.pack("<I", len(payload))
    return header + payload


def write_wav(path: str | Path, samples: np.ndarray, sample_rate: int) -> None:
    Path(path).write_bytes(write_wav_bytes(samples, sample_rate))
