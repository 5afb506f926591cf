"""Log-mel spectrogram images from one-second windows.

Conventions, pinned so two builds of this module agree bit-for-bit:

- STFT: periodic Hann, frame count 1 + floor((n - fft) / hop), no padding.
- Mel scale: mel(f) = 2595 * log10(1 + f / 700).
- Filters: triangular, unit peak, band edges at equally spaced mel points.
- dB: 10 * log10(power + 1e-10), referenced to the image's own maximum,
  floored at -80 dB below it, then mapped affinely to [0, 1].
- Image: rows are mel bands (row 0 = lowest), columns are frames,
  bilinearly resized (corner-aligned) to out_height x out_width and
  replicated across 3 channels, float32.

All intermediate math runs in float64; only the final image is float32.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass

import numpy as np
from sklearn.base import BaseEstimator, TransformerMixin
from sklearn.utils.validation import check_array, check_is_fitted

from .errors import (
    BadMagicError,
    DegenerateFilterError,
    FeatureError,
    TruncatedFileError,
    VersionUnsupportedError,
)

FEATURE_MAGIC = b"WMFI"
FEATURE_FORMAT_VERSION = 1
_DB_GUARD = 1e-10


@dataclass(frozen=True)
class FeatureConfig:
    sample_rate: int = 22050
    fft_size: int = 1024
    hop: int = 256
    mel_bands: int = 128
    f_min: float = 0.0
    f_max: float = 11025.0
    out_height: int = 224
    out_width: int = 224
    db_floor: float = -80.0
    resize: bool = True

    def __post_init__(self):
        if self.fft_size < 2 or self.fft_size & (self.fft_size - 1):
            raise FeatureError(f"fft_size must be a power of two, got {self.fft_size}")
        if not 0 < self.hop <= self.fft_size:
            raise FeatureError(f"hop must be in (0, fft_size], got {self.hop}")
        if self.mel_bands < 1:
            raise FeatureError("mel_bands must be >= 1")
        if not 0 <= self.f_min < self.f_max:
            raise FeatureError("need 0 <= f_min < f_max")
        if self.f_max > self.sample_rate / 2:
            raise FeatureError(
                f"f_max {self.f_max} above Nyquist {self.sample_rate / 2}"
            )
        if self.out_height != 224 or self.out_width != 224:
            raise FeatureError("output image is fixed at 224 x 224")
        if self.db_floor >= 0:
            raise FeatureError("db_floor must be negative")


def hz_to_mel(f):
    return 2595.0 * np.log10(1.0 + np.asarray(f, dtype=np.float64) / 700.0)


def mel_to_hz(m):
    return 700.0 * (10.0 ** (np.asarray(m, dtype=np.float64) / 2595.0) - 1.0)


def mel_filterbank(cfg: FeatureConfig) -> np.ndarray:
    """(mel_bands, fft_size // 2 + 1) matrix of unit-peak triangles.

    Band m spans mel edge points m .. m+2 of mel_bands + 2 equally spaced
    points over [f_min, f_max], peaking at point m+1. Raises
    DegenerateFilterError if any band captures no FFT bin.
    """
    n_bins = cfg.fft_size // 2 + 1
    bin_hz = np.arange(n_bins) * (cfg.sample_rate / cfg.fft_size)
    edges_mel = np.linspace(hz_to_mel(cfg.f_min), hz_to_mel(cfg.f_max), cfg.mel_bands + 2)
    edges_hz = mel_to_hz(edges_mel)
    fb = np.zeros((cfg.mel_bands, n_bins), dtype=np.float64)
    for m in range(cfg.mel_bands):
        lo, center, hi = edges_hz[m], edges_hz[m + 1], edges_hz[m + 2]
        up = (bin_hz - lo) / (center - lo)
        down = (hi - bin_hz) / (hi - center)
        fb[m] = np.maximum(0.0, np.minimum(up, down))
    dead = np.flatnonzero(~fb.any(axis=1))
    if dead.size:
        raise DegenerateFilterError(
            f"mel bands {dead.tolist()} capture no FFT bin; "
            "widen the band range or lower mel_bands"
        )
    return fb


def filter_centers_hz(cfg: FeatureConfig) -> np.ndarray:
    """Peak frequency of each mel band, in Hz."""
    edges_mel = np.linspace(hz_to_mel(cfg.f_min), hz_to_mel(cfg.f_max), cfg.mel_bands + 2)
    return mel_to_hz(edges_mel[1:-1])


def stft_magnitude(window: np.ndarray, cfg: FeatureConfig) -> np.ndarray:
    """(frames, fft_size // 2 + 1) magnitude spectrogram.

    Frames are hops of the analysis window over the signal with no padding:
    1 + floor((n - fft_size) / hop) frames.
    """
    x = np.asarray(window, dtype=np.float64)
    if x.ndim != 1:
        raise FeatureError("window must be 1-D")
    n = len(x)
    if n < cfg.fft_size:
        raise FeatureError(f"window of {n} samples shorter than fft_size {cfg.fft_size}")
    frames = 1 + (n - cfg.fft_size) // cfg.hop
    idx = np.arange(frames)[:, None] * cfg.hop + np.arange(cfg.fft_size)[None, :]
    # periodic Hann: denominator N, not N-1
    hann = 0.5 - 0.5 * np.cos(2.0 * np.pi * np.arange(cfg.fft_size) / cfg.fft_size)
    return np.abs(np.fft.rfft(x[idx] * hann, axis=1))


def mel_power(magnitude: np.ndarray, cfg: FeatureConfig, fb: np.ndarray | None = None) -> np.ndarray:
    """(frames, mel_bands) mel-projected power spectrogram."""
    if fb is None:
        fb = mel_filterbank(cfg)
    return (np.asarray(magnitude, dtype=np.float64) ** 2) @ fb.T


def bilinear_resize(grid: np.ndarray, out_h: int, out_w: int) -> np.ndarray:
    """Corner-aligned bilinear resize; identity when sizes already match."""
    a = np.asarray(grid, dtype=np.float64)
    in_h, in_w = a.shape
    if in_h < 2 or in_w < 2:
        raise FeatureError("resize input must be at least 2 x 2")
    if (in_h, in_w) == (out_h, out_w):
        return a.copy()
    ys = np.linspace(0.0, in_h - 1.0, out_h)
    xs = np.linspace(0.0, in_w - 1.0, out_w)
    y0 = np.clip(np.floor(ys).astype(int), 0, in_h - 2)
    x0 = np.clip(np.floor(xs).astype(int), 0, in_w - 2)
    wy = (ys - y0)[:, None]
    wx = (xs - x0)[None, :]
    tl = a[np.ix_(y0, x0)]
    tr = a[np.ix_(y0, x0 + 1)]
    bl = a[np.ix_(y0 + 1, x0)]
    br = a[np.ix_(y0 + 1, x0 + 1)]
    top = tl + (tr - tl) * wx
    bot = bl + (br - bl) * wx
    return top + (bot - top) * wy


def to_feature_image(mel_pow: np.ndarray, cfg: FeatureConfig) -> np.ndarray:
    """Normalize mel power to a (out_h, out_w, 3) float32 image in [0, 1].

    The dB reference is the image's own maximum; an all-zero input uses a
    0 dB reference, which lands every pixel at the floor, i.e. 0.0.
    """
    p = np.asarray(mel_pow, dtype=np.float64)
    db = 10.0 * np.log10(p + _DB_GUARD)
    p_max = p.max() if p.size else 0.0
    ref_db = 10.0 * np.log10(p_max + _DB_GUARD) if p_max > 0.0 else 0.0
    unit = np.clip((db - (ref_db + cfg.db_floor)) / -cfg.db_floor, 0.0, 1.0)
    grid = unit.T  # rows = mel bands, columns = frames
    if cfg.resize:
        grid = np.clip(bilinear_resize(grid, cfg.out_height, cfg.out_width), 0.0, 1.0)
    elif grid.shape != (cfg.out_height, cfg.out_width):
        raise FeatureError(
            f"resize disabled but native grid is {grid.shape}, "
            f"not {(cfg.out_height, cfg.out_width)}"
        )
    return np.repeat(grid[:, :, None], 3, axis=2).astype(np.float32)


def featurize_window(window: np.ndarray, cfg: FeatureConfig | None = None, fb: np.ndarray | None = None) -> np.ndarray:
    """One-second window -> (224, 224, 3) float32 image."""
    if cfg is None:
        cfg = FeatureConfig()
    return to_feature_image(mel_power(stft_magnitude(window, cfg), cfg, fb), cfg)


# --- feature file format ----------------------------------------------------

def write_feature_bytes(image: np.ndarray) -> bytes:
    img = np.ascontiguousarray(image, dtype="<f4")
    if img.ndim != 3:
        raise FeatureError(f"feature image must be 3-D, got shape {img.shape}")
    h, w, c = img.shape
    header = FEATURE_MAGIC + struct.pack("<IIII", FEATURE_FORMAT_VERSION, h, w, c)
    return header + img.tobytes()


def read_feature_bytes(data: bytes) -> np.ndarray:
    if len(data) < 4 or data[:4] != FEATURE_MAGIC:
        raise BadMagicError("not a feature image file")
    if len(data) < 20:
        raise TruncatedFileError("feature header incomplete")
    version, h, w, c = struct.unpack_from("<IIII", data, 4)
    if version != FEATURE_FORMAT_VERSION:
        raise VersionUnsupportedError(f"feature format version {version}")
    need = h * w * c * 4
    body = data[20:]
    if len(body) < need:
        raise TruncatedFileError(f"feature payload {len(body)} bytes, need {need}")
    return np.frombuffer(body[:need], dtype="<f4").reshape(h, w, c).copy()


def write_feature_file(path, image: np.ndarray) -> None:
    from pathlib import Path

    Path(path).write_bytes(write_feature_bytes(image))


def read_feature_file(path) -> np.ndarray:
    from pathlib import Path

    return read_feature_bytes(Path(path).read_bytes())


# --- sklearn-style surface ---------------------------------------------------

class MelSpectrogramFeaturizer(TransformerMixin, BaseEstimator):
    """Transform (n_windows, sample_rate) float arrays into stacked images.

    fit() takes no training data; it validates parameters and precomputes
    the filterbank. transform() returns (n_windows, 224, 224, 3) float32.
    """

    def __init__(
        self,
        sample_rate: int = 22050,
        fft_size: int = 1024,
        hop: int = 256,
        mel_bands: int = 128,
        f_min: float = 0.0,
        f_max: float = 11025.0,
        db_floor: float = -80.0,
    ):
        self.sample_rate = sample_rate
        self.fft_size = fft_size
        self.hop = hop
        self.mel_bands = mel_bands
        self.f_min = f_min
        self.f_max = f_max
        self.db_floor = db_floor

    def fit(self, X=None, y=None):
        self.config_ = FeatureConfig(
            sample_rate=self.sample_rate,
            fft_size=self.fft_size,
            hop=self.hop,
            mel_bands=self.mel_bands,
            f_min=self.f_min,
            f_max=self.f_max,
            db_floor=self.db_floor,
        )
        self.filterbank_ = mel_filterbank(self.config_)
        return self

    def transform(self, X) -> np.ndarray:
        check_is_fitted(self, "config_")
        X = check_array(X, dtype=np.float64, ensure_2d=True)
        if X.shape[1] != self.config_.sample_rate:
            raise FeatureError(
                f"each window must have exactly {self.config_.sample_rate} "
                f"samples, got {X.shape[1]}"
            )
        return np.stack(
            [featurize_window(row, self.config_, self.filterbank_) for row in X]
        )

    def get_feature_config(self) -> FeatureConfig:
        check_is_fitted(self, "config_")
        return self.config_
