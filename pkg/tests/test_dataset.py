import hashlib
import logging

import numpy as np
import pytest

from chaordic.audio import AudioBuffer, StftConfig, read_wav, stft, write_wav
from chaordic.augment import varispeed
from chaordic.dataset import (
    DatasetManifest,
    LabeledSample,
    RatedSample,
    aggregate_ratings,
    assign_splits,
    augment_manifest,
    augment_sample,
    balance,
    extract_textures,
    make_synthetic_sources,
    read_ratings,
    verify_manifest,
)

SR = 22050


def labeled(i, label, sw_p=1.0, **over):
    base = dict(sample_id=f"s{i:04d}", audio_path=f"s{i:04d}.wav",
                label=label, sw_p=sw_p)
    base.update(over)
    return LabeledSample(**base)


# -- rating aggregation ------------------------------------------------------

def test_aggregate_mean_label():
    s = RatedSample("a", "a.wav", [4, 5, 5, 6])
    out = aggregate_ratings([s])[0]
    assert out.label == 5
    assert 0.0 <= out.sw_p <= 1.0


def test_aggregate_perfect_agreement_kept_with_p_one():
    out = aggregate_ratings([RatedSample("a", "a.wav", [7, 7, 7, 7])])[0]
    assert out.label == 7
    assert out.sw_p == 1.0
    assert not out.ambiguous


def test_aggregate_p_ordering_matches_oracle():
    # Oracle-computed ordering (scipy.stats.shapiro): at n=4 the seemingly
    # tighter {5,5,5,6} is the *less* normal sample (three ties + outlier,
    # W=0.6298, p=0.0012) than the symmetric {0,10,0,10} (W=0.7286,
    # p=0.0239). Perfect agreement still outranks both via the p=1 rule.
    spread, tight, perfect = aggregate_ratings([
        RatedSample("spread", "x.wav", [0, 10, 0, 10]),
        RatedSample("tight", "y.wav", [5, 5, 5, 6]),
        RatedSample("perfect", "z.wav", [5, 5, 5, 5]),
    ])
    assert abs(spread.sw_p - 0.023856794993470473) < 1e-2
    assert abs(tight.sw_p - 0.0012407259151036264) < 1e-2
    assert tight.sw_p < spread.sw_p < perfect.sw_p
    assert perfect.sw_p == 1.0


def test_aggregate_rejects_bad_ratings():
    with pytest.raises(ValueError):
        RatedSample("a", "a.wav", [5])
    with pytest.raises(ValueError):
        RatedSample("a", "a.wav", [5, 11])


# -- balancing ---------------------------------------------------------------

def test_balance_trims_to_minimum_count():
    rng = np.random.default_rng(0)
    samples = []
    i = 0
    for label, count in ((0, 50), (5, 40), (10, 50)):
        for _ in range(count):
            samples.append(labeled(i, label, sw_p=float(rng.random())))
            i += 1
    out = balance(samples)
    counts = {}
    for s in out:
        counts[s.label] = counts.get(s.label, 0) + 1
    assert counts == {0: 40, 5: 40, 10: 40}


def test_balance_idempotent_on_balanced_input():
    samples = [labeled(i, i % 11, sw_p=0.5) for i in range(44)]
    once = balance(samples)
    assert once == samples
    assert balance(once) == once


def test_balance_removes_exactly_lowest_p():
    samples = [
        labeled(0, 3, sw_p=0.9), labeled(1, 3, sw_p=0.1), labeled(2, 3, sw_p=0.5),
        labeled(3, 7, sw_p=0.8), labeled(4, 7, sw_p=0.7),
    ]
    out = balance(samples)
    ids = {s.sample_id for s in out}
    assert ids == {"s0000", "s0002", "s0003", "s0004"}


def test_balance_warns_on_empty_labels(caplog):
    with caplog.at_level(logging.WARNING):
        balance([labeled(0, 3), labeled(1, 4)])
    assert "zero samples" in caplog.text


# -- extraction --------------------------------------------------------------

def test_extract_texture_counts_match_corpus_product(tmp_path):
    # The count rule: sources x per_source, here at miniature duration.
    src_dir = tmp_path / "src"
    paths = make_synthetic_sources(src_dir, n_sources=100, duration_s=0.25, seed=1)
    records, report = extract_textures(paths, per_source=10, out_dir=tmp_path / "tex",
                                       duration_s=0.15, seed=2)
    assert len(records) == 1000
    assert report["rendered"] == 1000 and report["skipped"] == []


def test_extract_zero_per_source(tmp_path):
    paths = make_synthetic_sources(tmp_path / "src", n_sources=2, duration_s=0.3)
    records, _ = extract_textures(paths, 0, tmp_path / "tex")
    assert records == []


def test_extract_deterministic_checksums(tmp_path):
    paths = make_synthetic_sources(tmp_path / "src", n_sources=3, duration_s=0.4, seed=9)

    def run(out):
        records, _ = extract_textures(paths, 4, tmp_path / out, duration_s=0.2, seed=33)
        return [hashlib.sha256((tmp_path / out / r["audio_path"]).read_bytes()).hexdigest()
                for r in records]

    assert run("a") == run("b")


def test_extract_skips_unreadable(tmp_path):
    paths = make_synthetic_sources(tmp_path / "src", n_sources=2, duration_s=0.3)
    bad = tmp_path / "src" / "broken.wav"
    bad.write_bytes(b"not audio at all")
    records, report = extract_textures(list(paths) + [bad], 2, tmp_path / "tex",
                                       duration_s=0.2)
    assert len(records) == 4
    assert len(report["skipped"]) == 1
    assert "broken.wav" in report["skipped"][0]["path"]


# -- augmentation ------------------------------------------------------------

def _tiny_labeled_manifest(tmp_path, n=4, dur=0.3):
    audio_dir = tmp_path / "audio"
    audio_dir.mkdir(exist_ok=True)
    rng = np.random.default_rng(5)
    samples = []
    t = np.arange(int(dur * SR)) / SR
    for i in range(n):
        sig = np.sin(2 * np.pi * rng.uniform(200, 900) * t) * 0.8
        sid = f"tex{i:03d}"
        write_wav(audio_dir / f"{sid}.wav", AudioBuffer(sig, SR))
        samples.append(LabeledSample(sid, f"{sid}.wav", label=i % 11,
                                     n_samples=len(t)))
    return DatasetManifest(samples=samples), audio_dir


def test_augment_default_factor_is_eleven(tmp_path):
    manifest, audio_dir = _tiny_labeled_manifest(tmp_path, n=5)
    out = augment_manifest(manifest, audio_dir, variants=10, seed=1)
    assert len(out.samples) == 55


def test_augment_zero_variants(tmp_path):
    manifest, audio_dir = _tiny_labeled_manifest(tmp_path, n=3)
    out = augment_manifest(manifest, audio_dir, variants=0, seed=1)
    assert out.samples == manifest.samples


def test_augment_preserves_duration_label_and_peak(tmp_path):
    manifest, audio_dir = _tiny_labeled_manifest(tmp_path, n=2)
    parent = manifest.samples[0]
    buf = read_wav(audio_dir / parent.audio_path)
    for variant, vbuf in augment_sample(parent, buf, variants=8, seed=3):
        assert variant.label == parent.label
        assert variant.augmented_from == parent.sample_id
        assert len(vbuf) == len(buf)
        assert np.isclose(np.max(np.abs(vbuf.samples)), 0.9)


def test_varispeed_shifts_dominant_peak_by_ratio():
    t = np.arange(3 * SR) / SR
    buf = AudioBuffer(np.sin(2 * np.pi * 1000.0 * t) * 0.8, SR)
    cfg = StftConfig(window_size=2048, hop_size=1024)
    for ratio in (0.8, 1.25):
        out = varispeed(buf, ratio)
        # ignore the padded tail when slowed down
        core = AudioBuffer(out.samples[: int(2 * SR)], SR)
        before = np.argmax(stft(AudioBuffer(buf.samples[: int(2 * SR)], SR), cfg)
                           .magnitudes.mean(axis=0))
        after = np.argmax(stft(core, cfg).magnitudes.mean(axis=0))
        assert abs(after - before * ratio) <= 1.0


# -- splits / manifest -------------------------------------------------------

def test_split_proportions_and_leakage(tmp_path):
    samples = [labeled(i, i % 11) for i in range(220)]
    manifest = assign_splits(DatasetManifest(samples=samples), seed=4)
    counts = {"train": 0, "val": 0, "test": 0}
    for s in manifest.samples:
        counts[s.split] += 1
    assert counts["train"] == 176 and counts["val"] == 22 and counts["test"] == 22

    aug_manifest, audio_dir = _tiny_labeled_manifest(tmp_path, n=6)
    expanded = augment_manifest(aug_manifest, audio_dir, variants=3, seed=0)
    final = assign_splits(expanded, seed=1)
    parents = {s.sample_id: s.split for s in final.samples if s.augmented_from is None}
    for s in final.samples:
        if s.augmented_from:
            assert s.split == parents[s.augmented_from]
    assert verify_manifest(final, audio_dir) == []


def test_split_deterministic():
    samples = [labeled(i, i % 11) for i in range(110)]
    a = assign_splits(DatasetManifest(samples=samples), seed=7)
    b = assign_splits(DatasetManifest(samples=samples), seed=7)
    assert a.samples == b.samples


def test_manifest_roundtrip(tmp_path):
    samples = [labeled(i, i % 11, split="train") for i in range(5)]
    m = DatasetManifest(samples=samples)
    m.save(tmp_path / "m.json")
    back = DatasetManifest.load(tmp_path / "m.json")
    assert back.samples == samples
    assert back.label_convention == "10_most_ordered"


def test_verify_manifest_flags_missing_and_leaks(tmp_path):
    manifest, audio_dir = _tiny_labeled_manifest(tmp_path, n=2)
    manifest.samples[0].split = "train"
    manifest.samples[1].split = "train"
    ghost = LabeledSample("ghost", "ghost.wav", label=1, split="train")
    leak = LabeledSample("leak", manifest.samples[0].audio_path, label=1,
                         split="test", augmented_from=manifest.samples[0].sample_id)
    manifest.samples += [ghost, leak]
    problems = verify_manifest(manifest, audio_dir)
    assert any("missing file" in p for p in problems)
    assert any("leaks" in p for p in problems)


def test_read_ratings(tmp_path):
    table = tmp_path / "ratings.txt"
    table.write_text(
        "# id rater mark\n"
        "tex000, r1, 4\n"
        "tex000\tr2\t6\n"
        "tex001 r1 9\n"
    )
    got = read_ratings(table)
    assert got == {"tex000": [4, 6], "tex001": [9]}
    bad = tmp_path / "bad.txt"
    bad.write_text("tex000 r1\n")
    with pytest.raises(ValueError):
        read_ratings(bad)
