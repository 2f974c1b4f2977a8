"""Seeded granular synthesizer: grain scheduling, offline and block rendering.

A texture is an overlap-add of short hann-enveloped source slices. Every
random draw is keyed to (seed, grain index), so offline renders and block
streaming produce identical grains regardless of block boundaries.
"""

from __future__ import annotations

import queue
from dataclasses import dataclass, fields, asdict

import numpy as np

from .audio import AudioBuffer

PARAM_FORMAT_VERSION = 1

# Ordered parameter tuple. Order is fixed and versioned: the Markov layer
# treats it as the sequence the chain walks, and corpus files record it.
# (name, low, high, scale) where scale is the perceptual mapping used for
# quantization and for uniform random draws.
PARAM_SPECS = (
    ("grain_duration_ms", 5.0, 500.0, "log"),
    ("grain_density_hz", 0.5, 200.0, "log"),
    ("source_position", 0.0, 1.0, "lin"),
    ("position_jitter", 0.0, 1.0, "lin"),
    ("pitch_ratio", 0.25, 4.0, "log"),
    ("pitch_jitter", 0.0, 1.0, "lin"),
    ("onset_jitter", 0.0, 1.0, "lin"),
    ("amplitude", 0.0, 1.0, "lin"),
)

PARAM_NAMES = tuple(s[0] for s in PARAM_SPECS)
N_PARAMS = len(PARAM_SPECS)


@dataclass(frozen=True)
class SynthParamSet:
    grain_duration_ms: float
    grain_density_hz: float
    source_position: float
    position_jitter: float
    pitch_ratio: float
    pitch_jitter: float
    onset_jitter: float
    amplitude: float

    def __post_init__(self):
        for (name, lo, hi, _scale) in PARAM_SPECS:
            v = getattr(self, name)
            if not (lo <= v <= hi):
                raise ValueError(f"{name}={v} outside [{lo}, {hi}]")

    def as_tuple(self) -> tuple:
        return tuple(getattr(self, name) for name in PARAM_NAMES)

    def to_dict(self) -> dict:
        d = {"format_version": PARAM_FORMAT_VERSION}
        d.update(asdict(self))
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "SynthParamSet":
        version = d.get("format_version", PARAM_FORMAT_VERSION)
        if version != PARAM_FORMAT_VERSION:
            raise ValueError(f"unknown param format version {version}")
        return cls(**{f.name: float(d[f.name]) for f in fields(cls)})

    @classmethod
    def from_tuple(cls, values) -> "SynthParamSet":
        return cls(**dict(zip(PARAM_NAMES, map(float, values))))


def random_param_set(rng: np.random.Generator) -> SynthParamSet:
    """Uniform draw per parameter, in each parameter's perceptual scale."""
    vals = []
    for (_name, lo, hi, scale) in PARAM_SPECS:
        if scale == "log":
            vals.append(float(np.exp(rng.uniform(np.log(lo), np.log(hi)))))
        else:
            vals.append(float(rng.uniform(lo, hi)))
    return SynthParamSet.from_tuple(vals)


@dataclass(frozen=True)
class GrainEvent:
    onset: int  # output samples
    duration: int  # output samples
    source_offset: float  # source samples, fractional
    rate: float
    gain: float
    index: int  # global grain counter, the deterministic tiebreak

    def __post_init__(self):
        if self.onset < 0 or self.duration <= 0 or self.rate <= 0:
            raise ValueError("invalid grain event")


def _grain_rng(seed: int, index: int) -> np.random.Generator:
    return np.random.default_rng(np.random.SeedSequence([int(seed), int(index)]))


def schedule_grains(
    params: SynthParamSet,
    duration_s: float,
    source_len: int,
    seed: int,
    sample_rate: int = 22050,
) -> list[GrainEvent]:
    """Grain events for a constant-parameter texture, sorted by onset.

    Base onsets sit on the grid k / grain_density_hz; each is perturbed by
    uniform(+-onset_jitter/2 * interval) and clamped at 0. Events whose
    perturbed onset falls at or past the end are dropped (they would render
    zero samples).
    """
    if source_len <= 0:
        raise ValueError("source_len must be positive")
    if duration_s < 0:
        raise ValueError("duration_s must be >= 0")
    total = int(round(duration_s * sample_rate))
    if total == 0:
        return []
    interval = 1.0 / params.grain_density_hz
    events = []
    k = 0
    # The extra half interval admits grains whose base slot sits just past the
    # end but whose jittered onset lands inside; onset < total filters the rest.
    # Each grain's draws are keyed to (seed, k), so the margin never shifts
    # other grains' randomness.
    while k * interval < duration_s + interval / 2.0:
        ev = _event_for_index(params, k, k * interval, sample_rate, source_len, seed)
        if ev.onset < total:
            events.append(ev)
        k += 1
    events.sort(key=lambda e: (e.onset, e.index))
    return events


def _event_for_index(params, index, base_onset_s, sample_rate, source_len, seed):
    # The three jitter draws always happen, in a fixed order, so the random
    # stream does not depend on which jitters are zero.
    rng = _grain_rng(seed, index)
    interval = 1.0 / params.grain_density_hz
    onset_s = base_onset_s + rng.uniform(-0.5, 0.5) * params.onset_jitter * interval
    pos = (params.source_position + rng.uniform(-0.5, 0.5) * params.position_jitter) % 1.0
    rate = params.pitch_ratio * 2.0 ** rng.uniform(-params.pitch_jitter, params.pitch_jitter)
    dur = max(1, int(round(params.grain_duration_ms / 1000.0 * sample_rate)))
    return GrainEvent(
        onset=max(0, int(round(onset_s * sample_rate))),
        duration=dur,
        source_offset=pos * source_len,
        rate=rate,
        gain=params.amplitude,
        index=index,
    )


def _grain_wave(event: GrainEvent, source: np.ndarray, envelope: str) -> np.ndarray:
    """Render one grain: wrapped linear-interp source read, envelope, gain."""
    n = len(source)
    pos = (event.source_offset + np.arange(event.duration) * event.rate) % n
    i0 = pos.astype(np.int64)
    frac = pos - i0
    i1 = (i0 + 1) % n
    wave = source[i0] * (1.0 - frac) + source[i1] * frac
    if envelope == "hann":
        wave = wave * np.hanning(event.duration)
    elif envelope != "rect":
        raise ValueError("envelope must be 'hann' or 'rect'")
    return wave * event.gain


def _overlap_add(events, total: int, source: np.ndarray, envelope: str) -> np.ndarray:
    out = np.zeros(total)
    for ev in events:
        end = min(ev.onset + ev.duration, total)
        if end <= ev.onset:
            continue
        out[ev.onset:end] += _grain_wave(ev, source, envelope)[: end - ev.onset]
    return out


def soft_limit(samples: np.ndarray) -> np.ndarray:
    """Tanh limiter, engaged only when the signal actually exceeds +-1."""
    if len(samples) and np.max(np.abs(samples)) > 1.0:
        return np.tanh(samples)
    return samples


def render_texture(
    source: AudioBuffer,
    params: SynthParamSet,
    duration_s: float,
    seed: int,
    envelope: str = "hann",
    limiter: bool = True,
) -> AudioBuffer:
    """Render a fixed-duration texture. Fully determined by its arguments.

    Output length is exactly round(duration_s * sample_rate); grains running
    past the end are truncated. envelope='rect' is a test/debug mode.
    """
    if len(source) == 0:
        raise ValueError("empty source")
    sr = source.sample_rate
    total = int(round(duration_s * sr))
    events = schedule_grains(params, duration_s, len(source), seed, sr)
    out = _overlap_add(events, total, source.samples, envelope)
    if limiter:
        out = soft_limit(out)
    return AudioBuffer(out, sr)


class GranularStream:
    """Single-owner block renderer.

    One thread calls render(); parameter updates arrive through set_params()
    (a single-producer queue) and are drained at block boundaries, taking
    effect from the next grain onset, never mid-grain. Block concatenation
    reproduces render_texture(limiter=False) bit for bit.
    """

    def __init__(self, source: AudioBuffer, params: SynthParamSet, seed: int,
                 envelope: str = "hann"):
        if len(source) == 0:
            raise ValueError("empty source")
        self._source = source.samples
        self._sr = source.sample_rate
        self._params = params
        self._seed = int(seed)
        self._envelope = envelope
        self._inbox: queue.SimpleQueue = queue.SimpleQueue()
        self._cursor = 0  # samples rendered so far
        self._next_index = 0  # next grain counter
        self._epoch_start_s = 0.0  # base-grid origin of the current epoch
        self._epoch_index = 0  # grain counter at the epoch origin
        self._active: list[tuple] = []  # (event, cached wave)

    @property
    def sample_rate(self) -> int:
        return self._sr

    @property
    def params(self) -> SynthParamSet:
        return self._params

    def set_params(self, params: SynthParamSet) -> None:
        self._inbox.put(params)

    def _base_onset(self, index: int) -> float:
        interval = 1.0 / self._params.grain_density_hz
        return self._epoch_start_s + (index - self._epoch_index) * interval

    def _drain_inbox(self) -> None:
        latest = None
        while True:
            try:
                latest = self._inbox.get_nowait()
            except queue.Empty:
                break
        if latest is not None:
            # New grid starts where the old grid would have put the next grain.
            self._epoch_start_s = self._base_onset(self._next_index)
            self._epoch_index = self._next_index
            self._params = latest

    def _materialize(self, upto_sample: int) -> None:
        # Jitter moves an onset at most half an interval backward, so every
        # grain that can start before `upto_sample` has a base onset before
        # upto_sample + interval/2.
        while True:
            interval = 1.0 / self._params.grain_density_hz
            base = self._base_onset(self._next_index)
            if base * self._sr >= upto_sample + (interval / 2.0) * self._sr:
                break
            ev = _event_for_index(
                self._params, self._next_index, base, self._sr,
                len(self._source), self._seed,
            )
            self._active.append((ev, None))
            self._next_index += 1
        self._active.sort(key=lambda item: (item[0].onset, item[0].index))

    def render(self, block_size: int) -> np.ndarray:
        """Render the next block_size samples. block_size 0 is a no-op."""
        if block_size < 0:
            raise ValueError("block_size must be >= 0")
        if block_size == 0:
            return np.zeros(0)
        self._drain_inbox()
        start = self._cursor
        end = start + block_size
        self._materialize(end)
        out = np.zeros(block_size)
        still_active = []
        for ev, wave in self._active:
            if ev.onset >= end:
                still_active.append((ev, wave))
                continue
            if wave is None:
                wave = _grain_wave(ev, self._source, self._envelope)
            a = max(ev.onset, start)
            b = min(ev.onset + ev.duration, end)
            if a < b:
                out[a - start:b - start] += wave[a - ev.onset:b - ev.onset]
            if ev.onset + ev.duration > end:
                still_active.append((ev, wave))
        self._active = still_active
        self._cursor = end
        return out
