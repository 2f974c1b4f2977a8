"""Network layers with hand-written forward/backward passes.

Activations are NHWC. Every layer caches what its backward pass needs; a
backward call accumulates parameter gradients in place (zeroed by the
optimizer between steps) and returns the input gradient.
"""

from __future__ import annotations

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view


class Layer:
    def params(self) -> list[np.ndarray]:
        return []

    def grads(self) -> list[np.ndarray]:
        return []

    def out_shape(self, in_shape: tuple) -> tuple:
        return in_shape

    def forward(self, x: np.ndarray) -> np.ndarray:
        raise NotImplementedError

    def backward(self, dy: np.ndarray) -> np.ndarray:
        raise NotImplementedError


class Conv2D(Layer):
    """3x3, stride 1, zero padding 1: spatial size is preserved."""

    KERNEL = 3

    def __init__(self, in_channels: int, out_channels: int, rng: np.random.Generator,
                 dtype=np.float32):
        k = self.KERNEL
        fan_in = k * k * in_channels
        limit = np.sqrt(6.0 / fan_in)
        self.w = rng.uniform(-limit, limit, (k, k, in_channels, out_channels)).astype(dtype)
        self.b = np.zeros(out_channels, dtype=dtype)
        self.dw = np.zeros_like(self.w)
        self.db = np.zeros_like(self.b)
        self._cols = None
        self._x_shape = None

    def params(self):
        return [self.w, self.b]

    def grads(self):
        return [self.dw, self.db]

    def out_shape(self, in_shape):
        h, w, _c = in_shape
        return (h, w, self.w.shape[3])

    def forward(self, x):
        k = self.KERNEL
        b, h, w, c = x.shape
        xp = np.pad(x, ((0, 0), (1, 1), (1, 1), (0, 0)))
        win = sliding_window_view(xp, (k, k), axis=(1, 2))  # (B,H,W,C,k,k)
        cols = np.ascontiguousarray(win.transpose(0, 1, 2, 4, 5, 3)).reshape(b * h * w, k * k * c)
        self._cols = cols
        self._x_shape = x.shape
        out = cols @ self.w.reshape(k * k * c, -1) + self.b
        return out.reshape(b, h, w, -1)

    def backward(self, dy):
        k = self.KERNEL
        b, h, w, c = self._x_shape
        c_out = self.w.shape[3]
        dy_flat = dy.reshape(b * h * w, c_out)
        self.dw += (self._cols.T @ dy_flat).reshape(self.w.shape)
        self.db += dy_flat.sum(axis=0)
        dcols = (dy_flat @ self.w.reshape(k * k * c, c_out).T).reshape(b, h, w, k, k, c)
        dxp = np.zeros((b, h + 2, w + 2, c), dtype=dy.dtype)
        for i in range(k):
            for j in range(k):
                dxp[:, i:i + h, j:j + w, :] += dcols[:, :, :, i, j, :]
        return dxp[:, 1:1 + h, 1:1 + w, :]


class ReLU(Layer):
    def forward(self, x):
        self._mask = x > 0
        return x * self._mask

    def backward(self, dy):
        return dy * self._mask


class MaxPool2x2(Layer):
    """2x2 windows, stride 2; ties resolve to the first (row-major) element."""

    def out_shape(self, in_shape):
        h, w, c = in_shape
        if h % 2 or w % 2:
            raise ValueError(f"maxpool needs even spatial dims, got {h}x{w}")
        return (h // 2, w // 2, c)

    def forward(self, x):
        b, h, w, c = x.shape
        win = x.reshape(b, h // 2, 2, w // 2, 2, c).transpose(0, 1, 3, 5, 2, 4)
        flat = win.reshape(b, h // 2, w // 2, c, 4)
        self._arg = np.argmax(flat, axis=-1)
        self._x_shape = x.shape
        return np.take_along_axis(flat, self._arg[..., None], axis=-1)[..., 0]

    def backward(self, dy):
        b, h, w, c = self._x_shape
        dflat = np.zeros((b, h // 2, w // 2, c, 4), dtype=dy.dtype)
        np.put_along_axis(dflat, self._arg[..., None], dy[..., None], axis=-1)
        dwin = dflat.reshape(b, h // 2, w // 2, c, 2, 2).transpose(0, 1, 4, 2, 5, 3)
        return dwin.reshape(b, h, w, c)


class Flatten(Layer):
    def out_shape(self, in_shape):
        return (int(np.prod(in_shape)),)

    def forward(self, x):
        self._x_shape = x.shape
        return x.reshape(x.shape[0], -1)

    def backward(self, dy):
        return dy.reshape(self._x_shape)


class Dense(Layer):
    def __init__(self, in_units: int, out_units: int, rng: np.random.Generator,
                 dtype=np.float32):
        limit = np.sqrt(6.0 / in_units)
        self.w = rng.uniform(-limit, limit, (in_units, out_units)).astype(dtype)
        self.b = np.zeros(out_units, dtype=dtype)
        self.dw = np.zeros_like(self.w)
        self.db = np.zeros_like(self.b)

    def params(self):
        return [self.w, self.b]

    def grads(self):
        return [self.dw, self.db]

    def out_shape(self, in_shape):
        return (self.w.shape[1],)

    def forward(self, x):
        self._x = x
        return x @ self.w + self.b

    def backward(self, dy):
        self.dw += self._x.T @ dy
        self.db += dy.sum(axis=0)
        return dy @ self.w.T


class Softmax(Layer):
    """Max-subtraction stabilized; safe for logits out to +-1e3 and beyond."""

    def forward(self, x):
        z = x - x.max(axis=-1, keepdims=True)
        e = np.exp(z)
        self._p = e / e.sum(axis=-1, keepdims=True)
        return self._p

    def backward(self, dy):
        p = self._p
        return p * (dy - np.sum(dy * p, axis=-1, keepdims=True))


def softmax(x: np.ndarray) -> np.ndarray:
    z = x - x.max(axis=-1, keepdims=True)
    e = np.exp(z)
    return e / e.sum(axis=-1, keepdims=True)
