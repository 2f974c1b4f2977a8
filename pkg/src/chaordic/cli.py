"""Command-line entry point wiring the pipeline stages together."""

from __future__ import annotations

import argparse
import json
import logging
import os
import pathlib
import sys

import numpy as np

from . import dataset as ds
from .audio import read_wav, write_wav
from .config import EngineConfigFile
from .environment import Engine, EnvironmentConfig, NullSink, WavWriterSink, run_loop
from .features import all_split_arrays, grid_for_net, split_arrays
from .markov import (
    ParamCorpus,
    QuantizationSpec,
    TransitionModel,
    build_corpus,
    estimate,
    synthesize_with_order,
    validate_resynthesis,
)
from .net import Network, TrainConfig, evaluate, load_checkpoint, save_checkpoint, train

log = logging.getLogger(__name__)


def _wav_paths(spec) -> list[pathlib.Path]:
    import glob as globmod

    p = pathlib.Path(spec)
    if p.is_dir():
        paths = sorted(p.glob("*.wav"))
    elif p.is_file():
        paths = [p]
    else:
        paths = sorted(pathlib.Path(m) for m in globmod.glob(str(spec)))
    if not paths:
        raise FileNotFoundError(f"no wav files match {spec}")
    return paths


def _load_manifest(path) -> ds.DatasetManifest:
    if not pathlib.Path(path).exists():
        raise FileNotFoundError(f"manifest not found: {path}")
    return ds.DatasetManifest.load(path)


def _classifier_fn(net: Network):
    def classify(buffer):
        return net.forward(grid_for_net(net, buffer)).label
    return classify


# -- dataset ------------------------------------------------------------------


def cmd_dataset_extract(args) -> int:
    records, report = ds.extract_textures(
        _wav_paths(args.sources), args.per_source, args.out,
        duration_s=args.duration, seed=args.seed)
    out = pathlib.Path(args.out)
    (out / "textures.json").write_text(json.dumps(
        {"records": records, "report": report}, indent=1))
    print(f"rendered {report['rendered']} textures into {out} "
          f"({len(report['skipped'])} sources skipped)")
    return 0


def cmd_dataset_rate_import(args) -> int:
    raw = json.loads(pathlib.Path(args.textures).read_text())["records"]
    ratings = ds.read_ratings(args.ratings)
    rated = []
    for record in raw:
        marks = ratings.get(record["sample_id"])
        if not marks:
            log.warning("no ratings for %s; dropped", record["sample_id"])
            continue
        rated.append(ds.RatedSample(record["sample_id"], record["audio_path"],
                                    marks, record.get("provenance", {})))
    labeled = ds.aggregate_ratings(rated, alpha=args.alpha)
    for sample, record in zip(labeled, rated):
        sample.n_samples = next((r.get("n_samples") for r in raw
                                 if r["sample_id"] == sample.sample_id), None)
    manifest = ds.DatasetManifest(samples=labeled)
    manifest.save(args.out)
    print(f"labeled {len(labeled)} samples -> {args.out}")
    return 0


def cmd_dataset_balance(args) -> int:
    manifest = _load_manifest(args.manifest)
    kept = ds.balance(manifest.samples)
    out = ds.DatasetManifest(samples=kept, sample_rate=manifest.sample_rate)
    out.save(args.out)
    counts = {k: v for k, v in out.per_label_counts().items() if v}
    print(f"balanced {len(manifest.samples)} -> {len(kept)} samples; counts {counts}")
    return 0


def cmd_dataset_augment(args) -> int:
    manifest = _load_manifest(args.manifest)
    out = ds.augment_manifest(manifest, args.audio_dir, variants=args.variants,
                              seed=args.seed)
    out.save(args.out)
    print(f"augmented {len(manifest.samples)} -> {len(out.samples)} samples")
    return 0


def cmd_dataset_split(args) -> int:
    manifest = _load_manifest(args.manifest)
    out = ds.assign_splits(manifest, seed=args.seed)
    out.save(args.out)
    sizes = {s: len(out.split_samples(s)) for s in ("train", "val", "test")}
    print(f"splits {sizes}")
    return 0


# -- training -----------------------------------------------------------------


def cmd_train(args) -> int:
    manifest = _load_manifest(args.manifest)
    net = Network(seed=args.seed)
    data = all_split_arrays(manifest, args.audio_dir)
    config = TrainConfig(epochs=args.epochs, batch_size=args.batch_size,
                         shuffle_seed=args.seed)
    metrics = train(net, data, config,
                    checkpoint_path=args.out,
                    best_checkpoint_path=args.best or args.out)
    if args.metrics:
        pathlib.Path(args.metrics).write_text(json.dumps(metrics, indent=1))
    last = metrics[-1]
    print(f"trained {config.epochs} epochs: train acc {last['train_acc']:.3f}, "
          f"val acc {last['val_acc']:.3f} -> {args.out}")
    return 0


def cmd_evaluate(args) -> int:
    manifest = _load_manifest(args.manifest)
    net = load_checkpoint(args.checkpoint)
    frames, bins, _ = net.config.input_shape
    x, y = split_arrays(manifest, args.audio_dir, args.split, frames, bins)
    report = evaluate(net, x, y)
    print(f"{args.split}: accuracy {report['accuracy']:.4f}, "
          f"within-one {report['within_one']:.4f} over {report['count']} samples")
    print("confusion rows (true label -> predictions):")
    for label, row in enumerate(report["confusion"]):
        print(f"  {label:2d}: {row.tolist()}")
    return 0


def cmd_classify(args) -> int:
    net = load_checkpoint(args.checkpoint)
    buf = read_wav(args.wav)
    pred = net.forward(grid_for_net(net, buf))
    print(json.dumps({"probs": [round(float(p), 6) for p in pred.probs],
                      "argmax": pred.label}))
    return 0


# -- markov -------------------------------------------------------------------


def cmd_corpus_build(args) -> int:
    net = load_checkpoint(args.checkpoint)
    paths = _wav_paths(args.sources)
    sources = [read_wav(p) for p in paths]
    corpus = build_corpus(_classifier_fn(net), sources, args.per_label,
                          seed=args.seed, duration_s=args.duration,
                          budget_factor=args.budget_factor,
                          source_ids=[str(p) for p in paths])
    corpus.save(args.out)
    print(f"corpus: {len(corpus.entries)} entries -> {args.out}")
    if corpus.shortfall:
        print(f"shortfalls: {corpus.shortfall}")
    return 0


def cmd_model_estimate(args) -> int:
    corpus = ParamCorpus.load(args.corpus)
    model = estimate(corpus, QuantizationSpec(bins=args.bins),
                     smoothing=args.smoothing)
    model.save(args.out)
    print(f"model over labels {model.labels} -> {args.out}")
    return 0


def cmd_synth_render(args) -> int:
    model = TransitionModel.load(args.model)
    source = read_wav(args.source)
    texture, params = synthesize_with_order(model, source, args.label,
                                            args.duration, args.seed)
    write_wav(args.out, texture)
    print(json.dumps({"out": str(args.out), "params": params.to_dict()}))
    return 0


def cmd_validate(args) -> int:
    net = load_checkpoint(args.checkpoint)
    model = TransitionModel.load(args.model)
    source = read_wav(args.source)
    report = validate_resynthesis(model, _classifier_fn(net), source,
                                  renders_per_label=args.renders, seed=args.seed,
                                  duration_s=args.duration)
    print(json.dumps(report, indent=1))
    return 0


# -- live ---------------------------------------------------------------------


def _engine_from_config(cfg: EngineConfigFile, sink=None) -> Engine:
    net = load_checkpoint(cfg.paths["checkpoint"])
    model = TransitionModel.load(cfg.paths["model"])
    source = read_wav(cfg.paths["source"])
    input_buffer = read_wav(cfg.paths["input"]) if cfg.paths.get("input") else None
    if sink is None:
        if cfg.paths.get("output_wav"):
            sink = WavWriterSink(cfg.paths["output_wav"], source.sample_rate)
        else:
            sink = NullSink()
    return Engine(net, model, source, cfg.environment, sink=sink,
                  input_buffer=input_buffer)


def cmd_run(args) -> int:
    cfg = EngineConfigFile.load(args.config)
    engine = _engine_from_config(cfg)
    engine.run(duration_s=args.duration, realtime=args.realtime)
    log_path = args.session_log or cfg.paths.get("session_log")
    if log_path:
        engine.write_session_log(log_path)
        print(f"session log: {log_path} ({len(engine.session_log)} records)")
    cycles = sum(1 for r in engine.session_log if r["event"] == "cycle")
    print(f"ran {engine.state().t_s:.2f}s, {cycles} classification cycles")
    return 0


def cmd_serve(args) -> int:
    from .server import serve

    config_path = args.config or os.environ.get("CHAORDIC_CONFIG")
    if not config_path:
        raise ValueError("serve needs --config or CHAORDIC_CONFIG")
    port = args.port or int(os.environ.get("CHAORDIC_PORT", "8765"))
    cfg = EngineConfigFile.load(config_path)
    engine = _engine_from_config(cfg)
    frontend = args.frontend if args.frontend and pathlib.Path(args.frontend).is_dir() else None
    try:
        serve(engine, port=port, host=args.host, frontend_dir=frontend)
    except OSError as exc:
        raise RuntimeError(f"cannot listen on port {port}: {exc}") from exc
    return 0


# -- parser -------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="chaordic",
        description="Perceived chaos/order classification and order-targeted resynthesis")
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    dataset = sub.add_parser("dataset", help="dataset pipeline stages")
    dsub = dataset.add_subparsers(dest="stage", required=True)

    p = dsub.add_parser("extract", help="render random textures from a wav corpus")
    p.add_argument("--sources", required=True)
    p.add_argument("--per-source", type=int, default=10)
    p.add_argument("--out", required=True)
    p.add_argument("--duration", type=float, default=3.0)
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(func=cmd_dataset_extract)

    p = dsub.add_parser("rate-import", help="attach human ratings to textures")
    p.add_argument("--textures", required=True)
    p.add_argument("--ratings", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--alpha", type=float, default=0.05)
    p.set_defaults(func=cmd_dataset_rate_import)

    p = dsub.add_parser("balance", help="equalize per-label counts")
    p.add_argument("--manifest", required=True)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_dataset_balance)

    p = dsub.add_parser("augment", help="expand with label-preserving variants")
    p.add_argument("--manifest", required=True)
    p.add_argument("--audio-dir", required=True)
    p.add_argument("--variants", type=int, default=10)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_dataset_augment)

    p = dsub.add_parser("split", help="assign train/val/test (80/10/10)")
    p.add_argument("--manifest", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(func=cmd_dataset_split)

    p = sub.add_parser("train", help="train the order classifier")
    p.add_argument("--manifest", required=True)
    p.add_argument("--audio-dir", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--best")
    p.add_argument("--metrics")
    p.add_argument("--epochs", type=int, default=50)
    p.add_argument("--batch-size", type=int, default=10)
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("evaluate", help="accuracy and confusion on a split")
    p.add_argument("--manifest", required=True)
    p.add_argument("--audio-dir", required=True)
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--split", default="test", choices=("train", "val", "test"))
    p.set_defaults(func=cmd_evaluate)

    p = sub.add_parser("classify", help="classify one wav file")
    p.add_argument("wav")
    p.add_argument("--checkpoint", required=True)
    p.set_defaults(func=cmd_classify)

    corpus = sub.add_parser("corpus", help="parameter corpus stages")
    csub = corpus.add_subparsers(dest="stage", required=True)
    p = csub.add_parser("build", help="classifier-labeled random parameter corpus")
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--sources", required=True)
    p.add_argument("--per-label", type=int, default=182)
    p.add_argument("--duration", type=float, default=3.0)
    p.add_argument("--budget-factor", type=int, default=50)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_corpus_build)

    model = sub.add_parser("model", help="transition model stages")
    msub = model.add_subparsers(dest="stage", required=True)
    p = msub.add_parser("estimate", help="estimate per-label transition matrices")
    p.add_argument("--corpus", required=True)
    p.add_argument("--bins", type=int, default=16)
    p.add_argument("--smoothing", type=float, default=0.1)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_model_estimate)

    synth = sub.add_parser("synth", help="order-targeted synthesis")
    ssub = synth.add_subparsers(dest="stage", required=True)
    p = ssub.add_parser("render", help="render one texture at a requested order")
    p.add_argument("--model", required=True)
    p.add_argument("--source", required=True)
    p.add_argument("--label", type=int, required=True, choices=range(11))
    p.add_argument("--seed", type=int, required=True)
    p.add_argument("--duration", type=float, default=3.0)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_synth_render)

    p = sub.add_parser("validate", help="closed-loop re-synthesis report")
    p.add_argument("--model", required=True)
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--source", required=True)
    p.add_argument("--renders", type=int, default=50)
    p.add_argument("--duration", type=float, default=3.0)
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(func=cmd_validate)

    p = sub.add_parser("run", help="run the feedback loop from a config file")
    p.add_argument("--config", required=True)
    p.add_argument("--duration", type=float)
    p.add_argument("--realtime", action="store_true")
    p.add_argument("--session-log")
    p.set_defaults(func=cmd_run)

    p = sub.add_parser("serve", help="serve the control protocol for the UI")
    p.add_argument("--port", type=int)
    p.add_argument("--host", default="127.0.0.1")
    p.add_argument("--config")
    p.add_argument("--frontend")
    p.set_defaults(func=cmd_serve)

    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except (FileNotFoundError, ValueError, RuntimeError, KeyError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
