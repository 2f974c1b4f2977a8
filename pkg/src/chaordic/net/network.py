"""Network assembly, inference, loss/gradient, and checkpoint I/O."""

from __future__ import annotations

import io
import json
import pathlib
from dataclasses import dataclass, field

import numpy as np

from .layers import Conv2D, Dense, Flatten, Layer, MaxPool2x2, ReLU, Softmax, softmax

N_CLASSES = 11

CHECKPOINT_MAGIC = b"CHRDNET1"
CHECKPOINT_VERSION = 1

DEFAULT_LAYERS = (
    {"type": "conv2d", "out_channels": 16},
    {"type": "relu"},
    {"type": "maxpool"},
    {"type": "conv2d", "out_channels": 32},
    {"type": "relu"},
    {"type": "maxpool"},
    {"type": "flatten"},
    {"type": "dense", "units": 64},
    {"type": "relu"},
    {"type": "dense", "units": N_CLASSES},
    {"type": "softmax"},
)


@dataclass(frozen=True)
class NetworkConfig:
    input_shape: tuple = (128, 128, 1)
    layers: tuple = DEFAULT_LAYERS
    classes: int = N_CLASSES

    def to_dict(self) -> dict:
        return {"input_shape": list(self.input_shape),
                "layers": [dict(l) for l in self.layers],
                "classes": self.classes}

    @classmethod
    def from_dict(cls, d: dict) -> "NetworkConfig":
        return cls(input_shape=tuple(d["input_shape"]),
                   layers=tuple(d["layers"]),
                   classes=int(d["classes"]))


@dataclass(frozen=True)
class Prediction:
    probs: np.ndarray
    label: int  # argmax, ties broken toward the lower label


class ShapeMismatch(ValueError):
    pass


class Network:
    """Feed-forward stack built from a NetworkConfig.

    Parameters are float32 by default; gradient-check code builds float64
    networks with the same topology.
    """

    def __init__(self, config: NetworkConfig = NetworkConfig(), seed: int = 0,
                 dtype=np.float32):
        self.config = config
        self.dtype = dtype
        self.seed = seed
        rng = np.random.default_rng(seed)
        self.layers: list[Layer] = []
        shape = tuple(config.input_shape)
        if len(config.layers) == 0 or config.layers[-1]["type"] != "softmax":
            raise ValueError("last layer must be softmax")
        for spec in config.layers:
            kind = spec["type"]
            if kind == "conv2d":
                if len(shape) != 3:
                    raise ValueError(f"conv2d needs a 3-d input, got {shape}")
                layer = Conv2D(shape[2], int(spec["out_channels"]), rng, dtype)
            elif kind == "relu":
                layer = ReLU()
            elif kind == "maxpool":
                layer = MaxPool2x2()
            elif kind == "flatten":
                layer = Flatten()
            elif kind == "dense":
                if len(shape) != 1:
                    raise ValueError(f"dense needs a flat input, got {shape}")
                layer = Dense(shape[0], int(spec["units"]), rng, dtype)
            elif kind == "softmax":
                layer = Softmax()
            else:
                raise ValueError(f"unknown layer type {kind}")
            shape = layer.out_shape(shape)
            self.layers.append(layer)
        if shape != (config.classes,):
            raise ValueError(f"final layer outputs {shape}, expected ({config.classes},)")

    # -- parameter access ----------------------------------------------------

    def params(self) -> list[np.ndarray]:
        return [p for layer in self.layers for p in layer.params()]

    def grads(self) -> list[np.ndarray]:
        return [g for layer in self.layers for g in layer.grads()]

    def zero_grads(self) -> None:
        for g in self.grads():
            g[...] = 0.0

    # -- inference -----------------------------------------------------------

    def _check_input(self, x: np.ndarray) -> np.ndarray:
        expected = tuple(self.config.input_shape)
        if x.shape == expected:
            x = x[None, ...]
        if x.shape[1:] != expected:
            raise ShapeMismatch(f"expected input shape {expected}, got {x.shape[1:]}")
        return np.asarray(x, dtype=self.dtype)

    def forward_batch(self, x: np.ndarray) -> np.ndarray:
        x = self._check_input(x)
        for layer in self.layers:
            x = layer.forward(x)
        return x

    def forward(self, grid: np.ndarray) -> Prediction:
        probs = self.forward_batch(grid)[0]
        return Prediction(probs=probs, label=int(np.argmax(probs)))

    # -- loss ------------------------------------------------------------------

    def loss_and_grad(self, x: np.ndarray, targets: np.ndarray) -> tuple[float, list]:
        """Mean categorical crossentropy over the batch plus full gradients.

        Softmax and crossentropy are fused: the logit gradient is
        (probs - onehot) / batch, which stays exact for extreme logits.
        """
        targets = np.asarray(targets)
        if np.any((targets < 0) | (targets >= self.config.classes)):
            raise ValueError(f"targets must lie in 0..{self.config.classes - 1}")
        x = self._check_input(x)
        if len(targets) != len(x):
            raise ValueError("batch and targets length mismatch")
        for layer in self.layers[:-1]:
            x = layer.forward(x)
        probs = softmax(x)
        batch = len(targets)
        picked = probs[np.arange(batch), targets]
        loss = float(-np.mean(np.log(np.maximum(picked, 1e-300))))
        dlogits = probs.copy()
        dlogits[np.arange(batch), targets] -= 1.0
        dlogits /= batch
        dy = dlogits.astype(self.dtype)
        for layer in reversed(self.layers[:-1]):
            dy = layer.backward(dy)
        return loss, self.grads()


# -- checkpoints --------------------------------------------------------------


def save_checkpoint(net: Network, path) -> None:
    """magic + version + length-prefixed JSON header + float32 LE parameter
    blob in layer order."""
    header = json.dumps({"config": net.config.to_dict(), "seed": net.seed}).encode()
    blob = io.BytesIO()
    blob.write(CHECKPOINT_MAGIC)
    blob.write(np.uint32(CHECKPOINT_VERSION).tobytes())
    blob.write(np.uint32(len(header)).tobytes())
    blob.write(header)
    for p in net.params():
        blob.write(np.ascontiguousarray(p, dtype="<f4").tobytes())
    pathlib.Path(path).write_bytes(blob.getvalue())


def load_checkpoint(path) -> Network:
    raw = pathlib.Path(path).read_bytes()
    if raw[:8] != CHECKPOINT_MAGIC:
        raise ValueError(f"not a network checkpoint: {path}")
    version = int(np.frombuffer(raw[8:12], "<u4")[0])
    if version != CHECKPOINT_VERSION:
        raise ValueError(f"unsupported checkpoint version {version}")
    hlen = int(np.frombuffer(raw[12:16], "<u4")[0])
    header = json.loads(raw[16:16 + hlen].decode())
    net = Network(NetworkConfig.from_dict(header["config"]), seed=header.get("seed", 0))
    offset = 16 + hlen
    for p in net.params():
        n = p.size * 4
        values = np.frombuffer(raw[offset:offset + n], "<f4").reshape(p.shape)
        p[...] = values
        offset += n
    if offset != len(raw):
        raise ValueError("checkpoint size mismatch")
    return net
