"""Minibatch SGD training loop, evaluation, and the divergence guard."""

from __future__ import annotations

import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np

from .network import Network, save_checkpoint

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class TrainConfig:
    epochs: int = 50
    batch_size: int = 10
    learning_rate: float = 0.01
    momentum: float = 0.9
    decay_epoch: int = 35  # learning rate x0.1 from this epoch on
    decay_factor: float = 0.1
    shuffle_seed: int = 0
    workers: int = 1

    def __post_init__(self):
        if self.epochs < 1 or self.batch_size < 1:
            raise ValueError("epochs and batch_size must be >= 1")


class TrainingDiverged(RuntimeError):
    """Raised when a non-finite loss or parameter shows up."""


def _accuracy_and_loss(net: Network, x: np.ndarray, y: np.ndarray,
                       batch: int = 64) -> tuple[float, float]:
    correct, total_nll = 0, 0.0
    for i in range(0, len(x), batch):
        probs = net.forward_batch(x[i:i + batch])
        t = y[i:i + batch]
        correct += int(np.sum(np.argmax(probs, axis=1) == t))
        picked = probs[np.arange(len(t)), t]
        total_nll += float(-np.sum(np.log(np.maximum(picked, 1e-300))))
    return correct / len(x), total_nll / len(x)


def _shadow_net(net: Network) -> Network:
    """A net whose parameter arrays alias the original's but whose layer
    caches and gradient buffers are private, so it can run its own pass."""
    twin = Network(net.config, seed=net.seed, dtype=net.dtype)
    for mine, theirs in zip(twin.layers, net.layers):
        if mine.params():
            mine.w = theirs.w
            mine.b = theirs.b
    return twin


def _sharded_loss_and_grad(net: Network, shadows: list[Network], x, y) -> float:
    """Data-parallel gradient accumulation over worker threads.

    Each worker owns a shadow net; shard gradients are summed into the main
    net in worker-index order, so results do not depend on thread timing.
    """
    idx = np.array_split(np.arange(len(x)), len(shadows))
    shards = [(w, i) for w, i in enumerate(idx) if len(i)]

    def run(pair):
        w, i = pair
        shadows[w].zero_grads()
        loss, _ = shadows[w].loss_and_grad(x[i], y[i])
        return w, len(i), loss

    with ThreadPoolExecutor(max_workers=len(shards)) as pool:
        results = list(pool.map(run, shards))
    results.sort(key=lambda r: r[0])
    total = sum(n for _, n, _ in results)
    for w, n, _loss in results:
        for g_main, g_shard in zip(net.grads(), shadows[w].grads()):
            g_main += g_shard * (n / total)
    return float(sum(n * loss for _, n, loss in results) / total)


def train(
    net: Network,
    data: dict,
    config: TrainConfig = TrainConfig(),
    checkpoint_path=None,
    best_checkpoint_path=None,
) -> list[dict]:
    """Train on data['train_x'/'train_y'], validate on data['val_x'/'val_y'].

    Returns per-epoch metric records. Persists the final net and the best
    validation checkpoint when paths are given. Aborts with a diagnostic on
    the first non-finite loss.
    """
    x_train = np.asarray(data["train_x"], dtype=net.dtype)
    y_train = np.asarray(data["train_y"])
    x_val = np.asarray(data["val_x"], dtype=net.dtype)
    y_val = np.asarray(data["val_y"])
    if len(x_train) == 0 or len(x_val) == 0:
        raise ValueError("train and val splits must be non-empty")

    rng = np.random.default_rng(config.shuffle_seed)
    velocity = [np.zeros_like(p) for p in net.params()]
    shadows = [_shadow_net(net) for _ in range(config.workers)] if config.workers > 1 else None
    metrics = []
    best_val = -1.0
    for epoch in range(config.epochs):
        lr = config.learning_rate
        if epoch >= config.decay_epoch:
            lr *= config.decay_factor
        order = rng.permutation(len(x_train))
        epoch_loss = 0.0
        for start in range(0, len(order), config.batch_size):
            idx = order[start:start + config.batch_size]
            net.zero_grads()
            if shadows is not None and len(idx) >= config.workers:
                loss = _sharded_loss_and_grad(net, shadows, x_train[idx], y_train[idx])
                grads = net.grads()
            else:
                loss, grads = net.loss_and_grad(x_train[idx], y_train[idx])
            if not np.isfinite(loss):
                raise TrainingDiverged(
                    f"non-finite loss at epoch {epoch} batch {start // config.batch_size}")
            for v, p, g in zip(velocity, net.params(), grads):
                v *= config.momentum
                v -= lr * g
                p += v
            epoch_loss += loss * len(idx)
        train_acc, train_loss = _accuracy_and_loss(net, x_train, y_train)
        val_acc, val_loss = _accuracy_and_loss(net, x_val, y_val)
        record = {
            "epoch": epoch,
            "lr": lr,
            "batch_loss": epoch_loss / len(order),
            "train_loss": train_loss,
            "train_acc": train_acc,
            "val_loss": val_loss,
            "val_acc": val_acc,
        }
        metrics.append(record)
        log.info("epoch %3d loss %.4f train %.3f val %.3f",
                 epoch, train_loss, train_acc, val_acc)
        if best_checkpoint_path is not None and val_acc >= best_val:
            best_val = val_acc
            save_checkpoint(net, best_checkpoint_path)
        if checkpoint_path is not None:
            save_checkpoint(net, checkpoint_path)
    return metrics


def evaluate(net: Network, x: np.ndarray, y: np.ndarray) -> dict:
    """Exact accuracy, within-one-label accuracy, and the confusion matrix."""
    if len(x) == 0:
        raise ValueError("empty evaluation split")
    x = np.asarray(x, dtype=net.dtype)
    y = np.asarray(y)
    preds = np.empty(len(x), dtype=np.int64)
    for i in range(0, len(x), 64):
        preds[i:i + 64] = np.argmax(net.forward_batch(x[i:i + 64]), axis=1)
    classes = net.config.classes
    confusion = np.zeros((classes, classes), dtype=np.int64)
    for t, p in zip(y, preds):
        confusion[t, p] += 1
    exact = float(np.mean(preds == y))
    within_one = float(np.mean(np.abs(preds - y) <= 1))
    return {
        "accuracy": exact,
        "within_one": within_one,
        "confusion": confusion,
        "count": len(x),
    }
