"""Signal primitives: buffers, windowed STFT, log-magnitude grids, WAV I/O."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.io import wavfile

# Everything downstream (textures, features, the live loop) runs at this rate.
# Loaded audio is resampled on ingest.
ENGINE_SAMPLE_RATE = 22050

_ALLOWED_WINDOWS = (256, 512, 1024, 2048)


class AudioError(Exception):
    """Raised for malformed audio input or unusable file content."""


@dataclass(frozen=True)
class AudioBuffer:
    """Mono sample sequence plus its sample rate.

    Samples are float64 with nominal range [-1, 1]; nothing enforces the
    range, renders are limited explicitly where it matters.
    """

    samples: np.ndarray
    sample_rate: int = ENGINE_SAMPLE_RATE

    def __post_init__(self):
        if self.sample_rate <= 0:
            raise ValueError("sample_rate must be positive")
        object.__setattr__(self, "samples", np.asarray(self.samples, dtype=np.float64))
        if self.samples.ndim != 1:
            raise ValueError("AudioBuffer is mono: samples must be 1-D")

    def __len__(self):
        return len(self.samples)

    @property
    def duration(self) -> float:
        return len(self.samples) / self.sample_rate


@dataclass(frozen=True)
class StftConfig:
    window_size: int = 1024
    hop_size: int = 512
    window_function: str = "hann"  # "hann" or "rectangular"

    def __post_init__(self):
        if self.window_size not in _ALLOWED_WINDOWS:
            raise ValueError(f"window_size must be one of {_ALLOWED_WINDOWS}")
        if not (0 < self.hop_size <= self.window_size):
            raise ValueError("hop_size must satisfy 0 < hop <= window_size")
        if self.window_function not in ("hann", "rectangular"):
            raise ValueError("window_function must be 'hann' or 'rectangular'")

    def window(self) -> np.ndarray:
        if self.window_function == "hann":
            # Periodic Hann, the usual STFT analysis variant.
            n = np.arange(self.window_size)
            return 0.5 - 0.5 * np.cos(2.0 * np.pi * n / self.window_size)
        return np.ones(self.window_size)


@dataclass(frozen=True)
class Spectrogram:
    """Frames x bins magnitude grid; bins = window_size/2 + 1."""

    magnitudes: np.ndarray
    frame_rate: float
    bin_width: float

    @property
    def frames(self) -> int:
        return self.magnitudes.shape[0]

    @property
    def bins(self) -> int:
        return self.magnitudes.shape[1]


def stft(buffer: AudioBuffer, config: StftConfig = StftConfig()) -> Spectrogram:
    """Magnitude STFT with truncation framing.

    frames = floor((len - window) / hop) + 1; each frame is windowed and
    transformed, magnitudes are |rfft|.
    """
    n = len(buffer)
    w, h = config.window_size, config.hop_size
    if n < w:
        raise AudioError(f"input too short: {n} samples < window {w}")
    frames = (n - w) // h + 1
    idx = np.arange(w)[None, :] + h * np.arange(frames)[:, None]
    windowed = buffer.samples[idx] * config.window()[None, :]
    mags = np.abs(np.fft.rfft(windowed, axis=1))
    return Spectrogram(
        magnitudes=mags,
        frame_rate=buffer.sample_rate / h,
        bin_width=buffer.sample_rate / w,
    )


def _averaging_matrix(n_src: int, n_out: int) -> np.ndarray:
    """Row-stochastic matrix averaging n_src cells into n_out cells.

    Output cell i covers the source interval [i*n_src/n_out, (i+1)*n_src/n_out)
    with fractional overlap weighting, so constants are preserved exactly.
    """
    a = np.zeros((n_out, n_src))
    step = n_src / n_out
    for i in range(n_out):
        lo, hi = i * step, (i + 1) * step
        j0, j1 = int(np.floor(lo)), int(np.ceil(hi))
        for j in range(j0, min(j1, n_src)):
            a[i, j] = min(hi, j + 1) - max(lo, j)
    return a / a.sum(axis=1, keepdims=True)


def log_grid(
    spec: Spectrogram,
    out_frames: int = 128,
    out_bins: int = 128,
    floor_db: float = -80.0,
) -> np.ndarray:
    """Fixed-size, [0, 1]-normalized log-magnitude grid for the classifier.

    Magnitudes are area-averaged to out_frames x out_bins, converted to dB
    relative to the grid maximum, clamped to [floor_db, 0] and mapped to
    [0, 1]. An all-zero spectrogram maps to all zeros.
    """
    if out_frames < 1 or out_bins < 1:
        raise ValueError("output grid dimensions must be >= 1")
    if spec.frames == 0 or spec.bins == 0:
        raise AudioError("empty spectrogram")
    if floor_db >= 0:
        raise ValueError("floor_db must be negative")
    af = _averaging_matrix(spec.frames, out_frames)
    ab = _averaging_matrix(spec.bins, out_bins)
    mag = af @ spec.magnitudes @ ab.T
    ref = mag.max()
    if ref <= 0.0:
        return np.zeros((out_frames, out_bins))
    db = 20.0 * np.log10(np.maximum(mag / ref, 1e-300))
    db = np.clip(db, floor_db, 0.0)
    return (db - floor_db) / (-floor_db)


def resample(buffer: AudioBuffer, target_rate: int) -> AudioBuffer:
    """Linear-interpolation resample; identity when rates already match."""
    if target_rate <= 0:
        raise ValueError("target_rate must be positive")
    if buffer.sample_rate == target_rate or len(buffer) == 0:
        return AudioBuffer(buffer.samples.copy(), target_rate)
    ratio = buffer.sample_rate / target_rate
    n_out = int(round(len(buffer) / ratio))
    pos = np.arange(n_out) * ratio
    out = np.interp(pos, np.arange(len(buffer)), buffer.samples)
    return AudioBuffer(out, target_rate)


def read_wav(path, target_rate: int | None = ENGINE_SAMPLE_RATE) -> AudioBuffer:
    """Read a PCM16/float32 WAV, mix stereo to mono, resample to target_rate.

    Pass target_rate=None to keep the file's native rate.
    """
    try:
        rate, data = wavfile.read(path)
    except FileNotFoundError:
        raise
    except ValueError as exc:
        raise AudioError(f"unsupported format: {path}: {exc}") from exc
    if data.dtype == np.int16:
        samples = data.astype(np.float64) / 32768.0
    elif data.dtype == np.float32 or data.dtype == np.float64:
        samples = data.astype(np.float64)
    elif data.dtype == np.int32:
        samples = data.astype(np.float64) / 2147483648.0
    else:
        raise AudioError(f"unsupported format: {path}: dtype {data.dtype}")
    if samples.ndim == 2:
        if samples.shape[1] > 2:
            raise AudioError(f"unsupported format: {path}: {samples.shape[1]} channels")
        samples = samples.mean(axis=1)
    buf = AudioBuffer(samples, int(rate))
    if target_rate is not None and buf.sample_rate != target_rate:
        buf = resample(buf, target_rate)
    return buf


def write_wav(path, buffer: AudioBuffer, fmt: str = "float32") -> None:
    """Write a mono WAV as float32 (lossless round-trip) or pcm16."""
    if fmt == "float32":
        wavfile.write(path, buffer.sample_rate, buffer.samples.astype(np.float32))
    elif fmt == "pcm16":
        clipped = np.clip(buffer.samples, -1.0, 1.0)
        wavfile.write(path, buffer.sample_rate, (clipped * 32767.0).round().astype(np.int16))
    else:
        raise ValueError("fmt must be 'float32' or 'pcm16'")


def normalize_peak(buffer: AudioBuffer, peak: float = 0.9) -> AudioBuffer:
    """Scale so max |sample| == peak; silence passes through unchanged."""
    m = float(np.max(np.abs(buffer.samples))) if len(buffer) else 0.0
    if m <= 0.0:
        return buffer
    return AudioBuffer(buffer.samples * (peak / m), buffer.sample_rate)
