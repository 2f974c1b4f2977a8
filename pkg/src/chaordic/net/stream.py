"""Rolling-window streaming classification with per-emission timing."""

from __future__ import annotations

import time
from dataclasses import dataclass

import numpy as np

from ..audio import AudioBuffer, StftConfig, log_grid, stft
from .network import Network, Prediction


@dataclass(frozen=True)
class Emission:
    timestamp_s: float  # stream time of the window's trailing edge
    prediction: Prediction
    compute_ms: float


class StreamingPredictor:
    """Classify a live mono stream: 3 s rolling window, fixed emission hop.

    push() accepts arbitrary block sizes and returns the emissions that
    became due inside the pushed block. Nothing is emitted until the window
    has filled once (underrun suppression).
    """

    def __init__(
        self,
        net: Network,
        sample_rate: int = 22050,
        window_s: float = 3.0,
        hop_s: float = 0.25,
        stft_config: StftConfig = StftConfig(),
        floor_db: float = -80.0,
    ):
        if hop_s <= 0 or window_s <= 0:
            raise ValueError("window_s and hop_s must be positive")
        self.net = net
        self.sample_rate = sample_rate
        self.window = int(round(window_s * sample_rate))
        self.hop = int(round(hop_s * sample_rate))
        self.stft_config = stft_config
        self.floor_db = floor_db
        self._buf = np.zeros(self.window)
        self._filled = 0
        self._consumed = 0  # total samples ever pushed
        self._next_emit = self.window  # sample count at which to emit next

    def grid_for_window(self, window_samples: np.ndarray) -> np.ndarray:
        h, w, _ = self.net.config.input_shape
        spec = stft(AudioBuffer(window_samples, self.sample_rate), self.stft_config)
        return log_grid(spec, h, w, self.floor_db)[..., None]

    def _classify(self) -> Emission:
        t0 = time.perf_counter()
        grid = self.grid_for_window(self._buf)
        pred = self.net.forward(grid)
        dt = (time.perf_counter() - t0) * 1000.0
        return Emission(
            timestamp_s=self._consumed / self.sample_rate,
            prediction=pred,
            compute_ms=dt,
        )

    def push(self, block: np.ndarray) -> list[Emission]:
        block = np.asarray(block, dtype=np.float64)
        out = []
        pos = 0
        while pos < len(block):
            take = min(len(block) - pos, self._next_emit - self._consumed)
            chunk = block[pos:pos + take]
            if take >= self.window:
                self._buf[:] = chunk[-self.window:]
            else:
                self._buf = np.roll(self._buf, -take)
                self._buf[self.window - take:] = chunk
            self._filled = min(self.window, self._filled + take)
            self._consumed += take
            pos += take
            if self._consumed == self._next_emit:
                if self._filled >= self.window:
                    out.append(self._classify())
                self._next_emit += self.hop
        return out
