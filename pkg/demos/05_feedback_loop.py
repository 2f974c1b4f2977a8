"""The self-listening loop, offline and deterministic.

The engine classifies its own post-effects output, steers the synthesis
target per mode (here: opposite), and logs every decision. Also shows the two
bias processors nudging predictions.
"""

import argparse
import json
import pathlib
import tempfile

import numpy as np

from chaordic.audio import read_wav
from chaordic.dataset import make_synthetic_sources
from chaordic.effects import plate_reverb, random_amp_mod
from chaordic.environment import Engine, EnvironmentConfig, WavWriterSink
from chaordic.features import grid_for_net
from chaordic.markov import TransitionModel
from chaordic.net import load_checkpoint

parser = argparse.ArgumentParser()
parser.add_argument("checkpoint", type=pathlib.Path)
parser.add_argument("model", type=pathlib.Path, help="transition model JSON")
parser.add_argument("--out", type=pathlib.Path,
                    default=pathlib.Path(tempfile.mkdtemp(prefix="chaordic_loop_")))
args = parser.parse_args()

net = load_checkpoint(args.checkpoint)
model = TransitionModel.load(args.model)
source = read_wav(make_synthetic_sources(args.out / "src", n_sources=1, seed=1)[0])

config = EnvironmentConfig(mode="opposite", manual_target=5, regen_interval_s=4.0,
                           classify_hop_s=0.5, window_s=3.0, seed=11)
engine = Engine(net, model, source, config,
                sink=WavWriterSink(args.out / "loop.wav", source.sample_rate))
engine.run(duration_s=12.0)
engine.write_session_log(args.out / "session.ndjson")

cycles = [r for r in engine.session_log if r["event"] == "cycle"]
print(f"ran 12 s, {len(cycles)} classification cycles (opposite mode)")
for r in cycles[:6]:
    print(f"  t={r['t']:5.2f}s heard {r['prediction']['argmax']:2d} "
          f"-> target {r['target']:2d}")

# bias processors: same texture, biased, reclassified
classify = lambda buf: net.forward(grid_for_net(net, buf)).label
texture = read_wav(args.out / "loop.wav")
window = texture.samples[: 3 * texture.sample_rate]
from chaordic.audio import AudioBuffer
base = AudioBuffer(window, texture.sample_rate)
plain = classify(base)
with_reverb = classify(plate_reverb(base, mix=0.5, decay_s=2.0))
with_ampmod = classify(random_amp_mod(base, depth=0.5, rate_hz=8.0, seed=2))
print(f"bias check on the loop output: plain {plain}, "
      f"+reverb {with_reverb}, +amp-mod {with_ampmod}")
print(f"session log + wav in {args.out}")
