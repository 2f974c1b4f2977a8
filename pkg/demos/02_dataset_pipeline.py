"""The dataset pipeline end to end, at miniature scale.

Synthetic sources stand in for a downloaded corpus; simulated raters stand in
for the human survey (real ratings arrive through the same table format).
"""

import pathlib
import tempfile

import numpy as np

from chaordic.dataset import (
    DatasetManifest,
    RatedSample,
    aggregate_ratings,
    assign_splits,
    augment_manifest,
    balance,
    extract_textures,
    make_synthetic_sources,
    verify_manifest,
)

work = pathlib.Path(tempfile.mkdtemp(prefix="chaordic_demo_"))
print(f"working in {work}")

sources = make_synthetic_sources(work / "sources", n_sources=6, duration_s=1.0, seed=1)
records, report = extract_textures(sources, per_source=5, out_dir=work / "audio",
                                   duration_s=1.0, seed=2)
print(f"extracted {report['rendered']} textures from {len(sources)} sources")

# four simulated raters with per-rater noise around a hidden true level
rng = np.random.default_rng(3)
rated = []
for record in records:
    truth = rng.integers(0, 11)
    marks = np.clip(truth + rng.integers(-2, 3, size=4), 0, 10).tolist()
    rated.append(RatedSample(record["sample_id"], record["audio_path"], marks,
                             record["provenance"]))

labeled = aggregate_ratings(rated)
for s in labeled[:3]:
    print(f"  {s.sample_id}: label {s.label}, agreement p={s.sw_p:.3f}"
          f"{'  (ambiguous)' if s.ambiguous else ''}")

kept = balance(labeled)
counts = {}
for s in kept:
    counts[s.label] = counts.get(s.label, 0) + 1
print(f"balance: {len(labeled)} -> {len(kept)} samples, per-label counts {counts}")

manifest = DatasetManifest(samples=kept)
augmented = augment_manifest(manifest, work / "audio", variants=10, seed=4)
print(f"augment x11: {len(kept)} -> {len(augmented.samples)}")

final = assign_splits(augmented, seed=5)
sizes = {split: len(final.split_samples(split)) for split in ("train", "val", "test")}
problems = verify_manifest(final, work / "audio")
print(f"splits {sizes}; leakage/duration problems: {problems or 'none'}")
final.save(work / "manifest.json")
print(f"manifest: {work / 'manifest.json'}")
