"""Constructed-label benchmark dataset.

Human ratings are not available at desk scale, so this dataset builds the
label into the synthesis: the three jitter parameters sweep monotonically
from 0 (label 10, fully ordered) upward as the label descends, reaching 1
at label 0. The sweep is geometric rather than linear: the error of any
estimate of a jitter magnitude grows with the magnitude itself, so equal
multiplicative steps give every adjacent label pair the same
discriminability; a linear sweep makes the chaotic end of the scale
unresolvable and the ordered end trivial.

The remaining parameters stay inside ranges where grain structure is
legible in a 3 s texture, and the source corpus is built from stationary
tonal material (harmonic stacks, chirps, tone clusters) so that envelope
modulation comes from the grain process alone, never from the source.
"""

from __future__ import annotations

import pathlib

import numpy as np

from .audio import AudioBuffer, read_wav, write_wav, normalize_peak
from .dataset import DatasetManifest, LabeledSample, assign_splits
from .granular import SynthParamSet, render_texture

# Nuisance ranges: grain trains dense enough to express order, sparse enough
# that onsets stay distinct; pitch kept near unity so pitch jitter, not the
# base ratio, dominates spectral scatter.
DURATION_MS = (45.0, 60.0)
DENSITY_HZ = (12.0, 16.0)
PITCH_RATIO = (0.9, 1.15)

JITTER_FLOOR = 0.04  # label 9; each step down multiplies by (1/floor)^(1/9)


def jitter_for_label(label: int) -> float:
    """Monotone geometric sweep: 0 at label 10, 1 at label 0."""
    if not (0 <= label <= 10):
        raise ValueError("label must lie in 0..10")
    if label == 10:
        return 0.0
    return float(JITTER_FLOOR * (1.0 / JITTER_FLOOR) ** ((9 - label) / 9.0))


def make_proxy_sources(out_dir, n_sources: int = 8, duration_s: float = 4.0,
                       seed: int = 0, sample_rate: int = 22050) -> list[pathlib.Path]:
    """Stationary tonal sources: harmonic stacks, linear chirps (position maps
    to frequency), and inharmonic tone clusters."""
    out = pathlib.Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    n = int(duration_s * sample_rate)
    t = np.arange(n) / sample_rate
    paths = []
    for i in range(n_sources):
        rng = np.random.default_rng(np.random.SeedSequence([seed, 78, i]))
        kind = i % 3
        if kind == 0:
            f0 = rng.uniform(90, 350)
            sig = sum(rng.uniform(0.3, 1.0) / (h + 1) *
                      np.sin(2 * np.pi * f0 * (h + 1) * t + rng.uniform(0, 2 * np.pi))
                      for h in range(8))
        elif kind == 1:
            f_lo, f_hi = sorted(rng.uniform(150, 3000, 2))
            sig = np.sin(2 * np.pi * (f_lo * t + (f_hi - f_lo) * t ** 2 / (2 * duration_s)))
        else:
            freqs = rng.uniform(200, 2600, 3)
            sig = sum(np.sin(2 * np.pi * f * t + rng.uniform(0, 2 * np.pi)) for f in freqs)
        buf = normalize_peak(AudioBuffer(sig, sample_rate), 0.9)
        path = out / f"source_{i:02d}.wav"
        write_wav(path, buf)
        paths.append(path)
    return paths


def proxy_param_set(label: int, rng: np.random.Generator) -> SynthParamSet:
    """Random parameters whose jitter level encodes the label."""
    jitter = jitter_for_label(label)
    return SynthParamSet(
        grain_duration_ms=float(np.exp(rng.uniform(*np.log(DURATION_MS)))),
        grain_density_hz=float(np.exp(rng.uniform(*np.log(DENSITY_HZ)))),
        source_position=float(rng.uniform(0.0, 1.0)),
        position_jitter=jitter,
        pitch_ratio=float(np.exp(rng.uniform(*np.log(PITCH_RATIO)))),
        pitch_jitter=jitter,
        onset_jitter=jitter,
        amplitude=0.9,
    )


def make_proxy_dataset(
    out_dir,
    per_label: int = 100,
    duration_s: float = 3.0,
    seed: int = 0,
    n_sources: int = 8,
    sample_rate: int = 22050,
) -> DatasetManifest:
    """Render the labeled dataset into out_dir and return its split manifest."""
    out = pathlib.Path(out_dir)
    audio_dir = out / "audio"
    audio_dir.mkdir(parents=True, exist_ok=True)
    source_paths = make_proxy_sources(out / "sources", n_sources=n_sources,
                                      duration_s=4.0, seed=seed,
                                      sample_rate=sample_rate)
    sources = [read_wav(p, target_rate=sample_rate) for p in source_paths]
    samples = []
    for label in range(11):
        for i in range(per_label):
            rng = np.random.default_rng(np.random.SeedSequence([seed, label, i]))
            params = proxy_param_set(label, rng)
            src = int(rng.integers(len(sources)))
            render_seed = int(rng.integers(0, 2 ** 63))
            texture = normalize_peak(
                render_texture(sources[src], params, duration_s, seed=render_seed), 0.9)
            sid = f"proxy_l{label:02d}_{i:04d}"
            write_wav(audio_dir / f"{sid}.wav", texture)
            samples.append(LabeledSample(
                sample_id=sid,
                audio_path=f"audio/{sid}.wav",
                label=label,
                sw_p=1.0,  # constructed labels carry no rater ambiguity
                n_samples=len(texture),
                provenance={"source": str(source_paths[src]),
                            "render_seed": render_seed,
                            "params": params.to_dict()},
            ))
    manifest = assign_splits(DatasetManifest(samples=samples, sample_rate=sample_rate),
                             seed=seed)
    manifest.save(out / "manifest.json")
    return manifest
