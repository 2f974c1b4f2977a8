"""Label-preserving audio elaborations used to expand a labeled dataset.

Four transform families, applied round-robin; each keeps the input duration
and ends peak-normalized, so a variant is a drop-in replacement for its
parent in training.
"""

from __future__ import annotations

import numpy as np
from scipy.signal import fftconvolve, lfilter

from .audio import AudioBuffer, normalize_peak


def _fit_length(samples: np.ndarray, n: int) -> np.ndarray:
    if len(samples) >= n:
        return samples[:n]
    return np.pad(samples, (0, n - len(samples)))


def spectral_area_convolution(buf: AudioBuffer, rng: np.random.Generator) -> AudioBuffer:
    """Circularly convolve the two highest-energy octave bands, mix at -12 dB."""
    x = buf.samples
    n = len(x)
    spectrum = np.fft.rfft(x)
    freqs = np.fft.rfftfreq(n, 1.0 / buf.sample_rate)
    edges = 62.5 * 2.0 ** np.arange(0, 10)
    edges = edges[edges < buf.sample_rate / 2]
    bands = []
    for lo, hi in zip(edges[:-1], edges[1:]):
        mask = (freqs >= lo) & (freqs < hi)
        bands.append((float(np.sum(np.abs(spectrum[mask]) ** 2)), mask))
    bands.sort(key=lambda b: b[0], reverse=True)
    if len(bands) < 2 or bands[1][0] <= 0.0:
        return AudioBuffer(x.copy(), buf.sample_rate)
    a = np.fft.irfft(spectrum * bands[0][1], n)
    b = np.fft.irfft(spectrum * bands[1][1], n)
    conv = np.fft.irfft(np.fft.rfft(a) * np.fft.rfft(b), n)
    peak_in, peak_conv = np.max(np.abs(x)), np.max(np.abs(conv))
    if peak_conv > 0.0:
        conv *= peak_in / peak_conv
    return AudioBuffer(x + 10.0 ** (-12.0 / 20.0) * conv, buf.sample_rate)


def _biquad(kind: str, f0: float, q: float, sr: int) -> tuple[np.ndarray, np.ndarray]:
    """RBJ cookbook second-order section."""
    w0 = 2.0 * np.pi * f0 / sr
    cw, sw = np.cos(w0), np.sin(w0)
    alpha = sw / (2.0 * q)
    if kind == "lowpass":
        b = np.array([(1 - cw) / 2, 1 - cw, (1 - cw) / 2])
    elif kind == "highpass":
        b = np.array([(1 + cw) / 2, -(1 + cw), (1 + cw) / 2])
    elif kind == "bandpass":
        b = np.array([alpha, 0.0, -alpha])
    else:
        raise ValueError(f"unknown filter kind {kind}")
    a = np.array([1 + alpha, -2 * cw, 1 - alpha])
    return b / a[0], a / a[0]


def random_filter(buf: AudioBuffer, rng: np.random.Generator) -> AudioBuffer:
    """Resonant second-order filter with random type, centre and Q."""
    f0 = float(np.exp(rng.uniform(np.log(100.0), np.log(8000.0))))
    f0 = min(f0, 0.45 * buf.sample_rate)
    q = float(rng.uniform(0.5, 8.0))
    kind = ("lowpass", "highpass", "bandpass")[int(rng.integers(3))]
    b, a = _biquad(kind, f0, q, buf.sample_rate)
    return AudioBuffer(lfilter(b, a, buf.samples), buf.sample_rate)


def varispeed(buf: AudioBuffer, ratio: float) -> AudioBuffer:
    """Resample-by-reading-faster: pitch and speed move together by `ratio`.

    Output is trimmed or zero-padded back to the input length.
    """
    n = len(buf)
    pos = np.arange(0, n - 1, ratio)
    out = np.interp(pos, np.arange(n), buf.samples)
    return AudioBuffer(_fit_length(out, n), buf.sample_rate)


def random_varispeed(buf: AudioBuffer, rng: np.random.Generator) -> AudioBuffer:
    return varispeed(buf, float(rng.uniform(0.8, 1.25)))


def room_impulse(buf: AudioBuffer, rng: np.random.Generator) -> AudioBuffer:
    """Convolve with exponentially decaying noise (RT60 uniform in 0.2..2 s)."""
    rt60 = float(rng.uniform(0.2, 2.0))
    sr = buf.sample_rate
    n_ir = max(8, int(rt60 * sr))
    t = np.arange(n_ir) / sr
    ir = rng.standard_normal(n_ir) * 10.0 ** (-3.0 * t / rt60)
    ir /= np.sqrt(np.sum(ir ** 2))
    wet = fftconvolve(buf.samples, ir)[: len(buf)]
    return AudioBuffer(wet, sr)


ELABORATIONS = (
    spectral_area_convolution,
    random_filter,
    random_varispeed,
    room_impulse,
)


def make_variant(buf: AudioBuffer, variant_index: int, rng: np.random.Generator,
                 peak: float = 0.9) -> AudioBuffer:
    """One elaboration, chosen round-robin, length-preserving, peak-normalized."""
    out = ELABORATIONS[variant_index % len(ELABORATIONS)](buf, rng)
    out = AudioBuffer(_fit_length(out.samples, len(buf)), buf.sample_rate)
    return normalize_peak(out, peak)
