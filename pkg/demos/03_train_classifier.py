"""Train the order classifier on a constructed-label dataset.

Miniature by default (runs in about two minutes); pass --full for the
acceptance-scale experiment (100 textures per label, 50 epochs, ~20 min).
"""

import argparse
import pathlib
import tempfile
import time

from chaordic.features import all_split_arrays
from chaordic.net import Network, TrainConfig, evaluate, save_checkpoint, train
from chaordic.proxy import make_proxy_dataset

parser = argparse.ArgumentParser()
parser.add_argument("--full", action="store_true", help="acceptance-scale run")
parser.add_argument("--out", type=pathlib.Path,
                    default=pathlib.Path(tempfile.mkdtemp(prefix="chaordic_train_")))
args = parser.parse_args()

per_label = 100 if args.full else 20
epochs = 50 if args.full else 12

print(f"rendering {11 * per_label} textures (jitter sweep encodes the label)…")
t0 = time.perf_counter()
manifest = make_proxy_dataset(args.out, per_label=per_label, seed=0)
print(f"  dataset in {time.perf_counter() - t0:.0f}s -> {args.out}")

data = all_split_arrays(manifest, args.out)
print(f"  features: train {data['train_x'].shape}, val {data['val_x'].shape}, "
      f"test {data['test_x'].shape}")

net = Network(seed=0)
t0 = time.perf_counter()
metrics = train(net, data, TrainConfig(epochs=epochs, batch_size=10, shuffle_seed=0),
                best_checkpoint_path=args.out / "best.ckpt")
print(f"  trained {epochs} epochs in {(time.perf_counter() - t0) / 60:.1f} min")
for m in metrics[:: max(1, epochs // 5)] + [metrics[-1]]:
    print(f"    epoch {m['epoch']:2d}: loss {m['train_loss']:.3f} "
          f"train {m['train_acc']:.3f} val {m['val_acc']:.3f}")

report = evaluate(net, data["test_x"], data["test_y"])
print(f"test: exact {report['accuracy']:.3f}, within-one {report['within_one']:.3f} "
      f"over {report['count']} samples")
save_checkpoint(net, args.out / "final.ckpt")
print(f"checkpoints in {args.out}")
