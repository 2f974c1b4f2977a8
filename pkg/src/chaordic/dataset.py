"""Labeled-dataset pipeline: texture extraction, rating aggregation,
ambiguity-aware class balancing, augmentation, split assignment, manifests.

Label convention is fixed here once: 10 = maximally ordered, 0 = maximally
chaotic, recorded in every manifest.
"""

from __future__ import annotations

import json
import logging
import pathlib
import zlib
from dataclasses import dataclass, field, asdict

import numpy as np

from .audio import AudioBuffer, normalize_peak, read_wav, write_wav
from .augment import make_variant
from .granular import PARAM_FORMAT_VERSION, SynthParamSet, random_param_set, render_texture
from .normality import ZeroVarianceError, shapiro_wilk

log = logging.getLogger(__name__)

MANIFEST_VERSION = 1
LABEL_CONVENTION = "10_most_ordered"
N_LABELS = 11
SPLITS = ("train", "val", "test")


@dataclass
class RatedSample:
    sample_id: str
    audio_path: str
    ratings: list[int]
    provenance: dict = field(default_factory=dict)

    def __post_init__(self):
        if len(self.ratings) < 2:
            raise ValueError(f"{self.sample_id}: need >= 2 ratings")
        for r in self.ratings:
            if not (0 <= r <= 10):
                raise ValueError(f"{self.sample_id}: rating {r} outside 0..10")


@dataclass
class LabeledSample:
    sample_id: str
    audio_path: str
    label: int
    sw_p: float = 1.0
    split: str | None = None
    augmented_from: str | None = None
    ambiguous: bool = False
    n_samples: int | None = None
    provenance: dict = field(default_factory=dict)

    def __post_init__(self):
        if not (0 <= self.label <= 10):
            raise ValueError(f"label {self.label} outside 0..10")
        if self.split is not None and self.split not in SPLITS:
            raise ValueError(f"unknown split {self.split}")


@dataclass
class DatasetManifest:
    samples: list[LabeledSample]
    sample_rate: int = 22050
    version: int = MANIFEST_VERSION
    label_convention: str = LABEL_CONVENTION

    def per_label_counts(self) -> dict[int, int]:
        counts = {label: 0 for label in range(N_LABELS)}
        for s in self.samples:
            counts[s.label] += 1
        return counts

    def split_samples(self, split: str) -> list[LabeledSample]:
        return [s for s in self.samples if s.split == split]

    def save(self, path) -> None:
        payload = {
            "version": self.version,
            "label_convention": self.label_convention,
            "sample_rate": self.sample_rate,
            "param_format_version": PARAM_FORMAT_VERSION,
            "per_label_counts": {str(k): v for k, v in self.per_label_counts().items()},
            "samples": [asdict(s) for s in self.samples],
        }
        pathlib.Path(path).write_text(json.dumps(payload, indent=1))

    @classmethod
    def load(cls, path) -> "DatasetManifest":
        raw = json.loads(pathlib.Path(path).read_text())
        if raw.get("version") != MANIFEST_VERSION:
            raise ValueError(f"unsupported manifest version {raw.get('version')}")
        samples = [LabeledSample(**s) for s in raw["samples"]]
        return cls(samples=samples, sample_rate=raw.get("sample_rate", 22050),
                   label_convention=raw.get("label_convention", LABEL_CONVENTION))


def verify_manifest(manifest: DatasetManifest, base_dir) -> list[str]:
    """Return problems: missing files, duration deviations > 1 sample,
    and augmentation leakage (variant split != parent split)."""
    base = pathlib.Path(base_dir)
    problems = []
    by_id = {s.sample_id: s for s in manifest.samples}
    for s in manifest.samples:
        path = base / s.audio_path
        if not path.exists():
            problems.append(f"{s.sample_id}: missing file {s.audio_path}")
            continue
        if s.n_samples is not None:
            buf = read_wav(path, target_rate=None)
            if abs(len(buf) - s.n_samples) > 1:
                problems.append(
                    f"{s.sample_id}: duration {len(buf)} != declared {s.n_samples}")
        if s.augmented_from is not None:
            parent = by_id.get(s.augmented_from)
            if parent is None:
                problems.append(f"{s.sample_id}: unknown parent {s.augmented_from}")
            elif parent.split != s.split:
                problems.append(
                    f"{s.sample_id}: split {s.split} leaks across parent "
                    f"{parent.sample_id} split {parent.split}")
    return problems


# ---------------------------------------------------------------------------
# texture extraction


def extract_textures(
    source_paths,
    per_source: int,
    out_dir,
    duration_s: float = 3.0,
    seed: int = 0,
    sample_rate: int = 22050,
) -> tuple[list[dict], dict]:
    """Render per_source random-parameter textures from every source file.

    Returns (records, report). Each record carries id, relative audio path,
    the rendered parameter set and its seed. Unreadable sources are skipped
    and listed in report['skipped'].
    """
    source_paths = list(source_paths)
    if not source_paths:
        raise ValueError("empty source corpus")
    if per_source < 0:
        raise ValueError("per_source must be >= 0")
    out = pathlib.Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    records, skipped = [], []
    for fi, src_path in enumerate(source_paths):
        try:
            source = read_wav(src_path, target_rate=sample_rate)
            if len(source) == 0:
                raise ValueError("empty audio")
        except Exception as exc:  # unreadable file: skip, keep going
            log.warning("skipping unreadable source %s: %s", src_path, exc)
            skipped.append({"path": str(src_path), "error": str(exc)})
            continue
        stem = pathlib.Path(src_path).stem
        for ti in range(per_source):
            rng = np.random.default_rng(np.random.SeedSequence([seed, fi, ti]))
            params = random_param_set(rng)
            render_seed = int(rng.integers(0, 2 ** 63))
            texture = render_texture(source, params, duration_s, seed=render_seed)
            texture = normalize_peak(texture, 0.9)
            sample_id = f"{stem}_{ti:03d}"
            rel = f"{sample_id}.wav"
            write_wav(out / rel, texture)
            records.append({
                "sample_id": sample_id,
                "audio_path": rel,
                "n_samples": len(texture),
                "provenance": {
                    "source": str(src_path),
                    "render_seed": render_seed,
                    "params": params.to_dict(),
                },
            })
    report = {"rendered": len(records), "skipped": skipped,
              "per_source": per_source, "duration_s": duration_s, "seed": seed}
    return records, report


# ---------------------------------------------------------------------------
# ratings


def read_ratings(path) -> dict[str, list[int]]:
    """Parse the delimited rating table: sample_id, rater_id, mark (0..10)."""
    ratings: dict[str, list[int]] = {}
    for ln, line in enumerate(pathlib.Path(path).read_text().splitlines(), 1):
        line = line.strip()
        if not line or line.startswith("#"):
            continue
        parts = [p for p in line.replace(",", " ").replace("\t", " ").split() if p]
        if len(parts) != 3:
            raise ValueError(f"{path}:{ln}: expected 'sample_id rater_id mark'")
        sample_id, _rater, mark = parts
        value = int(mark)
        if not (0 <= value <= 10):
            raise ValueError(f"{path}:{ln}: mark {value} outside 0..10")
        ratings.setdefault(sample_id, []).append(value)
    return ratings


def aggregate_ratings(samples: list[RatedSample], alpha: float = 0.05) -> list[LabeledSample]:
    """Label each sample with round(mean(ratings)) and its ambiguity p-value.

    Perfect agreement (zero variance) is the least ambiguous case and gets
    p = 1. Samples with fewer ratings than the normality test supports (< 3,
    non-degenerate) get a neutral p = 0.5 and a warning. p < alpha only flags
    a sample as ambiguous; discarding is the balancing stage's job.
    """
    out = []
    for s in samples:
        values = np.asarray(s.ratings, dtype=float)
        try:
            _, p = shapiro_wilk(values)
        except ZeroVarianceError:
            p = 1.0
        except ValueError:
            log.warning("%s: %d ratings below normality-test range, p := 0.5",
                        s.sample_id, len(values))
            p = 0.5
        if len(values) < 8:
            log.info("%s: n=%d is below the reliable Shapiro-Wilk regime",
                     s.sample_id, len(values))
        label = int(round(float(values.mean())))
        out.append(LabeledSample(
            sample_id=s.sample_id,
            audio_path=s.audio_path,
            label=label,
            sw_p=float(p),
            ambiguous=p < alpha,
            provenance=dict(s.provenance),
        ))
    return out


# ---------------------------------------------------------------------------
# balancing / augmentation / splits


def balance(samples: list[LabeledSample]) -> list[LabeledSample]:
    """Trim every non-empty label to the common minimum count.

    Within a label the lowest-p (most ambiguous) samples go first; ties break
    on sample id. Input order of the survivors is preserved.
    """
    by_label: dict[int, list[LabeledSample]] = {}
    for s in samples:
        by_label.setdefault(s.label, []).append(s)
    nonempty = {lab: group for lab, group in by_label.items() if group}
    missing = sorted(set(range(N_LABELS)) - set(nonempty))
    if missing:
        log.warning("labels with zero samples excluded from balancing: %s", missing)
    if not nonempty:
        return []
    target = min(len(g) for g in nonempty.values())
    keep_ids = set()
    for group in nonempty.values():
        ranked = sorted(group, key=lambda s: (s.sw_p, s.sample_id))
        keep_ids.update(s.sample_id for s in ranked[len(ranked) - target:])
    return [s for s in samples if s.sample_id in keep_ids]


def augment_sample(
    sample: LabeledSample,
    buffer: AudioBuffer,
    variants: int,
    seed: int,
) -> list[tuple[LabeledSample, AudioBuffer]]:
    """Produce `variants` elaborated copies of one sample.

    Elaboration type rotates round-robin; each variant keeps the parent's
    label, duration and split, and is peak-normalized to 0.9.
    """
    if variants < 0:
        raise ValueError("variants must be >= 0")
    key = zlib.crc32(sample.sample_id.encode())
    out = []
    for v in range(variants):
        rng = np.random.default_rng(np.random.SeedSequence([seed, key, v]))
        variant = make_variant(buffer, v, rng)
        vid = f"{sample.sample_id}_aug{v:02d}"
        out.append((
            LabeledSample(
                sample_id=vid,
                audio_path=f"{vid}.wav",
                label=sample.label,
                sw_p=sample.sw_p,
                split=sample.split,
                augmented_from=sample.sample_id,
                n_samples=len(variant),
                provenance={"elaboration": v % 4},
            ),
            variant,
        ))
    return out


def augment_manifest(
    manifest: DatasetManifest,
    audio_dir,
    variants: int = 10,
    seed: int = 0,
) -> DatasetManifest:
    """Expand every non-augmented sample by `variants` elaborations.

    With the default of 10 the dataset grows by a factor of 11.
    """
    base = pathlib.Path(audio_dir)
    expanded: list[LabeledSample] = []
    for s in manifest.samples:
        expanded.append(s)
        if s.augmented_from is not None:
            continue
        buf = read_wav(base / s.audio_path, target_rate=manifest.sample_rate)
        for variant_sample, variant_buf in augment_sample(s, buf, variants, seed):
            write_wav(base / variant_sample.audio_path, variant_buf)
            expanded.append(variant_sample)
    return DatasetManifest(samples=expanded, sample_rate=manifest.sample_rate)


def assign_splits(
    manifest: DatasetManifest,
    fractions: tuple[float, float, float] = (0.8, 0.1, 0.1),
    seed: int = 0,
) -> DatasetManifest:
    """Assign train/val/test per label over parent samples; variants inherit.

    Keeping whole augmentation families in one split is what prevents
    augmented near-duplicates from leaking into evaluation.
    """
    if abs(sum(fractions) - 1.0) > 1e-9:
        raise ValueError("fractions must sum to 1")
    rng = np.random.default_rng(seed)
    parents = [s for s in manifest.samples if s.augmented_from is None]
    by_label: dict[int, list[LabeledSample]] = {}
    for s in parents:
        by_label.setdefault(s.label, []).append(s)
    assignment: dict[str, str] = {}
    for label in sorted(by_label):
        group = sorted(by_label[label], key=lambda s: s.sample_id)
        order = rng.permutation(len(group))
        n = len(group)
        n_val = int(round(fractions[1] * n))
        n_test = int(round(fractions[2] * n))
        n_train = n - n_val - n_test
        for rank, idx in enumerate(order):
            if rank < n_train:
                split = "train"
            elif rank < n_train + n_val:
                split = "val"
            else:
                split = "test"
            assignment[group[idx].sample_id] = split
    out = []
    for s in manifest.samples:
        root = s.augmented_from or s.sample_id
        if root not in assignment:
            raise ValueError(f"{s.sample_id}: parent {root} not in manifest")
        out.append(LabeledSample(**{**asdict(s), "split": assignment[root]}))
    return DatasetManifest(samples=out, sample_rate=manifest.sample_rate)


# ---------------------------------------------------------------------------
# synthetic sources (desk-scale stand-in for a downloaded corpus)


def make_synthetic_sources(out_dir, n_sources: int = 8, duration_s: float = 4.0,
                           seed: int = 0, sample_rate: int = 22050) -> list[pathlib.Path]:
    """Write a small corpus of procedural source files: harmonic stacks,
    filtered noise, chirps and hybrid mixtures."""
    out = pathlib.Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    n = int(duration_s * sample_rate)
    t = np.arange(n) / sample_rate
    paths = []
    for i in range(n_sources):
        rng = np.random.default_rng(np.random.SeedSequence([seed, i]))
        kind = i % 4
        if kind == 0:
            f0 = rng.uniform(80, 400)
            sig = sum(rng.uniform(0.2, 1.0) / (h + 1) *
                      np.sin(2 * np.pi * f0 * (h + 1) * t + rng.uniform(0, 2 * np.pi))
                      for h in range(6))
        elif kind == 1:
            sig = rng.standard_normal(n)
            kernel = np.hanning(int(rng.integers(9, 65)))
            sig = np.convolve(sig, kernel / kernel.sum(), mode="same")
        elif kind == 2:
            f_lo, f_hi = sorted(rng.uniform(100, 4000, 2))
            phase = 2 * np.pi * (f_lo * t + (f_hi - f_lo) * t ** 2 / (2 * duration_s))
            sig = np.sin(phase)
        else:
            f0 = rng.uniform(100, 800)
            sig = np.sin(2 * np.pi * f0 * t) * (0.4 + 0.6 * rng.random(n))
            sig += 0.3 * rng.standard_normal(n)
        buf = normalize_peak(AudioBuffer(sig, sample_rate), 0.9)
        path = out / f"source_{i:02d}.wav"
        write_wav(path, buf)
        paths.append(path)
    return paths
