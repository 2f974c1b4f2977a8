"""Acceptance suite: one test per criterion, one printed PASS/FAIL line each.

The heavy artifacts (proxy dataset, trained checkpoint, parameter corpus,
transition model) build once and are cached under .acceptance-cache/ keyed
by the experiment configuration; delete that directory or set
CHAORDIC_ACCEPTANCE_CACHE=0 for a cold build. A cold build takes roughly
20-25 minutes, dominated by the 50-epoch training run.
"""

import hashlib
import json
import os
import pathlib
import statistics
import time

import numpy as np
import pytest

from chaordic.audio import AudioBuffer, StftConfig, log_grid, normalize_peak, read_wav, stft
from chaordic.cli import main as cli_main
from chaordic.dataset import (
    DatasetManifest,
    LabeledSample,
    augment_manifest,
    make_synthetic_sources,
)
from chaordic.environment import Engine, EnvironmentConfig, NullSink
from chaordic.effects import plate_reverb, random_amp_mod
from chaordic.features import all_split_arrays, grid_for_net
from chaordic.granular import SynthParamSet, random_param_set, render_texture
from chaordic.markov import (
    CorpusEntry,
    ParamCorpus,
    QuantizationSpec,
    TransitionModel,
    build_corpus,
    estimate,
    synthesize_with_order,
    validate_resynthesis,
)
from chaordic.net import (
    Network,
    TrainConfig,
    evaluate,
    load_checkpoint,
    save_checkpoint,
    train,
)
from chaordic.net.layers import Conv2D, Dense, Flatten, MaxPool2x2, ReLU, Softmax
from chaordic.normality import shapiro_wilk
from chaordic.proxy import make_proxy_dataset

from gradcheck import (
    max_rel_err,
    pool_safe_input,
    random_small_shape,
    safe_relu_input,
)

EXPERIMENT = {
    "schema": 1,
    "per_label": 100,
    "dataset_seed": 20260809,
    "train": {"epochs": 50, "batch_size": 10, "shuffle_seed": 1},
    "net_seed": 7,
    "corpus": {"target_per_label": 100, "seed": 11, "budget_factor": 120},
    "model": {"bins": 16, "smoothing": 0.1},
}

TRAIN_BUDGET_S = 30 * 60

CACHE_ROOT = pathlib.Path(__file__).resolve().parent.parent / ".acceptance-cache"


def _cache_dir() -> pathlib.Path | None:
    if os.environ.get("CHAORDIC_ACCEPTANCE_CACHE", "1") == "0":
        return None
    key = hashlib.sha256(json.dumps(EXPERIMENT, sort_keys=True).encode()).hexdigest()[:12]
    return CACHE_ROOT / key


def _result(name: str, ok: bool, detail: str) -> None:
    print(f"\nACCEPTANCE {name}: {'PASS' if ok else 'FAIL'} ({detail})")


def _classifier(net):
    def classify(buffer: AudioBuffer) -> int:
        return net.forward(grid_for_net(net, buffer)).label
    return classify


def _build_world(work: pathlib.Path) -> dict:
    work.mkdir(parents=True, exist_ok=True)
    t0 = time.perf_counter()
    manifest = make_proxy_dataset(work / "dataset", per_label=EXPERIMENT["per_label"],
                                  seed=EXPERIMENT["dataset_seed"])
    dataset_seconds = time.perf_counter() - t0
    data = all_split_arrays(manifest, work / "dataset")
    np.savez_compressed(work / "features.npz", **data)

    net = Network(seed=EXPERIMENT["net_seed"])
    t0 = time.perf_counter()
    metrics = train(net, data, TrainConfig(**EXPERIMENT["train"]),
                    best_checkpoint_path=work / "best.ckpt")
    train_seconds = time.perf_counter() - t0
    save_checkpoint(net, work / "final.ckpt")

    sources = [read_wav(p) for p in sorted((work / "dataset" / "sources").glob("*.wav"))]
    t0 = time.perf_counter()
    corpus = build_corpus(_classifier(net), sources,
                          EXPERIMENT["corpus"]["target_per_label"],
                          seed=EXPERIMENT["corpus"]["seed"],
                          budget_factor=EXPERIMENT["corpus"]["budget_factor"])
    corpus_seconds = time.perf_counter() - t0
    corpus.save(work / "corpus.json")
    model = estimate(corpus, QuantizationSpec(bins=EXPERIMENT["model"]["bins"]),
                     smoothing=EXPERIMENT["model"]["smoothing"])
    model.save(work / "model.json")

    info = {
        "dataset_seconds": dataset_seconds,
        "train_seconds": train_seconds,
        "corpus_seconds": corpus_seconds,
        "metrics": metrics,
        "corpus_shortfall": corpus.shortfall,
        "manifest_counts": manifest.per_label_counts(),
    }
    (work / "build_info.json").write_text(json.dumps(info, indent=1))
    manifest.save(work / "manifest.json")
    return info


@pytest.fixture(scope="session")
def world(tmp_path_factory):
    cache = _cache_dir()
    work = cache if cache is not None else tmp_path_factory.mktemp("acceptance")
    if not (work / "build_info.json").exists():
        _build_world(work)
    info = json.loads((work / "build_info.json").read_text())
    data = dict(np.load(work / "features.npz"))
    net = load_checkpoint(work / "final.ckpt")
    return {
        "dir": work,
        "info": info,
        "data": data,
        "net": net,
        "manifest": DatasetManifest.load(work / "manifest.json"),
        "corpus": ParamCorpus.load(work / "corpus.json"),
        "model": TransitionModel.load(work / "model.json"),
        "sources": [read_wav(p) for p in
                    sorted((work / "dataset" / "sources").glob("*.wav"))]
        if (work / "dataset" / "sources").exists() else [],
    }


@pytest.fixture(scope="session")
def validation_source(world):
    if world["sources"]:
        return world["sources"][0]
    # cached world without audio: regenerate the identical source corpus
    paths = make_synthetic_sources(world["dir"] / "regen_sources", n_sources=8,
                                   duration_s=4.0, seed=EXPERIMENT["dataset_seed"])
    return read_wav(paths[0])


# -- criterion 1: synthetic-dataset classification proxy ------------------------


def test_synthetic_classification_proxy(world):
    manifest = world["manifest"]
    counts = {s: len(manifest.split_samples(s)) for s in ("train", "val", "test")}
    total = sum(counts.values())
    assert total == 11 * EXPERIMENT["per_label"]
    for split, frac in (("train", 0.8), ("val", 0.1), ("test", 0.1)):
        assert abs(counts[split] - frac * total) <= 11  # within per-label rounding
    parents = {s.sample_id: s.split for s in manifest.samples if s.augmented_from is None}
    for s in manifest.samples:
        if s.augmented_from is not None:
            assert s.split == parents[s.augmented_from], "augmentation leakage"

    report = evaluate(world["net"], world["data"]["test_x"], world["data"]["test_y"])
    train_seconds = world["info"]["train_seconds"]
    ok = (report["accuracy"] >= 0.60 and report["within_one"] >= 0.90
          and train_seconds <= TRAIN_BUDGET_S)
    _result(
        "classification-proxy", ok,
        f"test exact {report['accuracy']:.3f} (>=0.60), "
        f"within-one {report['within_one']:.3f} (>=0.90), "
        f"training {train_seconds/60:.1f} min (<=30)")
    assert report["accuracy"] >= 0.60
    assert report["within_one"] >= 0.90
    assert train_seconds <= TRAIN_BUDGET_S


# -- criterion 2: augmentation factor -------------------------------------------


def test_augmentation_factor_425_to_4675(tmp_path):
    sr = 22050
    audio_dir = tmp_path / "audio"
    audio_dir.mkdir()
    rng = np.random.default_rng(0)
    samples = []
    n = int(0.2 * sr)
    t = np.arange(n) / sr
    from chaordic.audio import write_wav

    for i in range(425):
        sid = f"item{i:04d}"
        sig = 0.8 * np.sin(2 * np.pi * rng.uniform(100, 2000) * t)
        write_wav(audio_dir / f"{sid}.wav", AudioBuffer(sig, sr))
        samples.append(LabeledSample(sid, f"{sid}.wav", label=i % 11, n_samples=n))
    manifest = DatasetManifest(samples=samples, sample_rate=sr)
    out = augment_manifest(manifest, audio_dir, variants=10, seed=1)
    ok = len(out.samples) == 4675
    _result("augmentation-factor", ok, f"425 -> {len(out.samples)} (expected exactly 4675)")
    assert len(out.samples) == 4675


# -- criterion 3: gradient correctness -------------------------------------------


def test_gradient_correctness_all_layers():
    trials_per_layer = 100
    worst = {}
    rng = np.random.default_rng(123)
    for name in ("conv2d", "dense", "relu", "maxpool", "flatten", "softmax"):
        errs = []
        for _ in range(trials_per_layer):
            if name == "conv2d":
                shape = random_small_shape(rng)
                layer = Conv2D(shape[3], int(rng.integers(1, 4)), rng, dtype=np.float64)
                x = rng.standard_normal(shape)
            elif name == "dense":
                n_in, n_out = int(rng.integers(1, 12)), int(rng.integers(1, 8))
                layer = Dense(n_in, n_out, rng, dtype=np.float64)
                x = rng.standard_normal((int(rng.integers(1, 4)), n_in))
            elif name == "relu":
                layer, x = ReLU(), safe_relu_input(rng, random_small_shape(rng))
            elif name == "maxpool":
                layer, x = MaxPool2x2(), pool_safe_input(rng, random_small_shape(rng))
            elif name == "flatten":
                layer, x = Flatten(), rng.standard_normal(random_small_shape(rng))
            else:
                layer = Softmax()
                x = rng.standard_normal((int(rng.integers(1, 4)), int(rng.integers(2, 12))))
            errs.append(max_rel_err(layer, x, rng))
        worst[name] = max(errs)
    overall = max(worst.values())
    ok = overall < 1e-4
    _result("gradient-correctness", ok,
            f"{trials_per_layer} trials/layer, worst rel err {overall:.2e} "
            f"({max(worst, key=worst.get)})")
    assert overall < 1e-4


# -- criterion 4: overfit check ---------------------------------------------------


def test_overfit_ten_samples(world):
    x = world["data"]["train_x"][:10]
    y = world["data"]["train_y"][:10]
    net = Network(seed=3)
    metrics = train(net, {"train_x": x, "train_y": y, "val_x": x, "val_y": y},
                    TrainConfig(epochs=50, batch_size=10, shuffle_seed=2))
    best = max(m["train_acc"] for m in metrics)
    ok = metrics[-1]["train_acc"] == 1.0
    _result("overfit-check", ok,
            f"final train acc {metrics[-1]['train_acc']:.2f}, best {best:.2f} over 50 epochs")
    assert metrics[-1]["train_acc"] == 1.0


# -- criterion 5: latency budget ---------------------------------------------------


def test_latency_budget(world):
    net = world["net"]
    sr = 22050
    rng = np.random.default_rng(0)
    window = rng.uniform(-0.5, 0.5, 3 * sr)
    cfg = StftConfig()
    times = []
    for _ in range(100):
        t0 = time.perf_counter()
        spec = stft(AudioBuffer(window, sr), cfg)
        grid = log_grid(spec, 128, 128)[..., None].astype(np.float32)
        net.forward(grid)
        times.append((time.perf_counter() - t0) * 1000.0)
    median = statistics.median(times)
    ok = median <= 100.0
    _result("latency-budget", ok,
            f"median {median:.1f} ms over 100 runs (budget 100 ms), "
            f"p90 {np.percentile(times, 90):.1f} ms")
    assert median <= 100.0


# -- criterion 6: Shapiro-Wilk vs frozen oracle -----------------------------------


def test_shapiro_wilk_against_reference():
    fixtures = json.loads(
        (pathlib.Path(__file__).parent / "fixtures" / "shapiro_reference.json").read_text()
    )["fixtures"]
    assert len(fixtures) == 50
    dw = dp = 0.0
    for fx in fixtures:
        w, p = shapiro_wilk(fx["values"])
        dw = max(dw, abs(w - fx["w"]))
        dp = max(dp, abs(p - fx["p"]))
    ok = dw <= 1e-3 and dp <= 1e-2
    _result("shapiro-wilk", ok,
            f"50 fixtures, max |dW| {dw:.2e} (<=1e-3), max |dp| {dp:.2e} (<=1e-2)")
    assert dw <= 1e-3
    assert dp <= 1e-2


# -- criterion 7: stochastic validity ----------------------------------------------


def test_transition_model_stochastic_validity(world):
    model = world["model"]
    worst = 0.0
    rows = 0
    for label in model.labels:
        init = model.initial(label)
        assert np.all(init >= 0)
        worst = max(worst, abs(float(init.sum()) - 1.0))
        trans = model.transitions(label)
        assert np.all(trans >= 0)
        sums = trans.sum(axis=2)
        worst = max(worst, float(np.max(np.abs(sums - 1.0))))
        rows += sums.size + 1

    # brute-force counting oracle on a fixed 6-entry corpus
    rng = np.random.default_rng(5)
    quant = QuantizationSpec()
    entries = [CorpusEntry(random_param_set(rng), label, "s", i)
               for i, label in enumerate([2, 2, 2, 9, 9, 9])]
    fixture = ParamCorpus(entries=entries, target_per_label=3)
    got = estimate(fixture, quant, smoothing=0.1)
    exact = True
    for label in (2, 9):
        tuples = [quant.quantize(e.params) for e in entries if e.label == label]
        b = quant.bins
        init_c = np.zeros(b)
        trans_c = np.zeros((7, b, b))
        for q in tuples:
            init_c[q[0]] += 1
            for k in range(7):
                trans_c[k][q[k]][q[k + 1]] += 1
        init_p = (init_c + 0.1) / (init_c.sum() + b * 0.1)
        exact &= bool(np.array_equal(got.initial(label), init_p))
        for k in range(7):
            for i in range(b):
                row = (trans_c[k][i] + 0.1) / (trans_c[k][i].sum() + b * 0.1)
                exact &= bool(np.array_equal(got.transitions(label)[k][i], row))

    ok = worst <= 1e-9 and exact
    _result("stochastic-validity", ok,
            f"{rows} distributions, worst row-sum error {worst:.1e} (<=1e-9), "
            f"counting-oracle exact: {exact}")
    assert worst <= 1e-9
    assert exact


# -- criterion 8: closed-loop re-synthesis proxy ------------------------------------


def test_resynthesis_proxy(world, validation_source):
    corpus = world["corpus"]
    n_entries = len(corpus.entries)
    report = validate_resynthesis(world["model"], _classifier(world["net"]),
                                  validation_source, renders_per_label=50,
                                  seed=17)
    mean_w1 = report["mean_within_one"]
    lines = ["label  exact  within1  signed(req-pred)"]
    for label, row in sorted(report["per_label"].items()):
        lines.append(f"  {label:2d}   {row['exact']:.2f}   {row['within_one']:.2f}"
                     f"     {row['mean_signed_error']:+.2f}")
    print("\n".join(lines))
    high = [row["mean_signed_error"] for label, row in report["per_label"].items()
            if label >= 8]
    if high and np.mean(high) > 0:
        print("asymmetry note: high-order requests drift 'softly disordered' "
              f"(mean signed error {np.mean(high):+.2f} on labels >= 8) — reported, not gated")
    se = {label: row["mean_signed_error"] for label, row in report["per_label"].items()}
    separation = None
    if 0 in se and 10 in se:
        separation = (10 - se[10]) - (0 - se[0])
    ok = n_entries >= 1100 and mean_w1 >= 0.85
    _result("resynthesis-proxy", ok,
            f"corpus {n_entries} entries (>=1100), mean within-one {mean_w1:.3f} (>=0.85)"
            + (f", label-0 vs label-10 mean-prediction separation {separation:.1f}"
               if separation is not None else ""))
    assert n_entries >= 1100
    assert mean_w1 >= 0.85
    if separation is not None:
        assert separation >= 5.0


# -- criterion 9: bias tendency (documented divergence allowed) ----------------------


def test_bias_tendency(world, validation_source):
    net = world["net"]
    classify = _classifier(net)
    base_preds, reverb_preds, amp_preds = [], [], []
    for i in range(100):
        label = i % 11
        texture, _ = synthesize_with_order(world["model"], validation_source,
                                           label, 3.0, seed=1000 + i)
        base_preds.append(classify(texture))
        reverb_preds.append(classify(plate_reverb(texture, mix=0.5, decay_s=2.0)))
        amp_preds.append(classify(random_amp_mod(texture, depth=0.5, rate_hz=8.0,
                                                 seed=i)))
    base = np.array(base_preds)
    rev = np.array(reverb_preds)
    amp = np.array(amp_preds)
    rev_up = float(np.mean(rev > base))
    amp_down = float(np.mean(amp < base))
    rev_mean_shift = float(np.mean(rev - base))
    amp_mean_shift = float(np.mean(amp - base))
    holds = (rev_mean_shift > 0 and amp_mean_shift < 0
             and rev_up >= 0.70 and amp_down >= 0.70)
    outcome = {
        "reverb_mean_shift": rev_mean_shift,
        "reverb_sign_consistency": rev_up,
        "amp_mod_mean_shift": amp_mean_shift,
        "amp_mod_sign_consistency": amp_down,
        "tendency_holds": holds,
    }
    (world["dir"] / "bias_tendency.json").write_text(json.dumps(outcome, indent=1))
    if holds:
        detail = (f"reverb {rev_mean_shift:+.2f} mean / {rev_up:.0%} consistent; "
                  f"amp-mod {amp_mean_shift:+.2f} mean / {amp_down:.0%} consistent")
    else:
        detail = ("documented divergence — desk model does not reproduce the "
                  f"claimed bias (reverb {rev_mean_shift:+.2f}/{rev_up:.0%}, "
                  f"amp-mod {amp_mean_shift:+.2f}/{amp_down:.0%}); "
                  "recorded in bias_tendency.json, not a build failure")
    _result("bias-tendency", True, detail)
    assert len(base) == 100  # the experiment itself must complete


# -- criterion 10: determinism --------------------------------------------------------


def test_determinism_cli_and_loop(world, validation_source, tmp_path):
    from chaordic.audio import write_wav

    model_path = world["dir"] / "model.json"
    ckpt_path = world["dir"] / "final.ckpt"
    source_path = tmp_path / "source.wav"
    write_wav(source_path, validation_source)

    outs = []
    for name in ("r1.wav", "r2.wav"):
        out = tmp_path / name
        code = cli_main(["synth", "render", "--model", str(model_path),
                         "--source", str(source_path), "--label", "7",
                         "--seed", "42", "--out", str(out)])
        assert code == 0
        outs.append(out.read_bytes())
    cli_ok = outs[0] == outs[1]

    logs = []
    for _ in range(2):
        config = EnvironmentConfig(mode="opposite", manual_target=5,
                                   regen_interval_s=2.0, classify_hop_s=0.5,
                                   window_s=3.0, seed=99)
        engine = Engine(load_checkpoint(ckpt_path), world["model"],
                        validation_source, config, sink=NullSink())
        engine.run(duration_s=8.0)
        logs.append(json.dumps(engine.session_log))
    loop_ok = logs[0] == logs[1]

    ok = cli_ok and loop_ok
    _result("determinism", ok,
            f"synth render byte-identical: {cli_ok}; "
            f"loopback session logs identical: {loop_ok}")
    assert cli_ok
    assert loop_ok
