"""The two prediction-bias processors: plate-style reverb and random
amplitude modulation.

Both are identity at their zero setting, bit-exact, and both expose a
streaming form whose chunked output equals the offline call sample for
sample (filter state is carried across blocks), so the live loop and
offline renders stay interchangeable.
"""

from __future__ import annotations

import math

import numpy as np
from scipy.signal import lfilter, lfiltic

from .audio import AudioBuffer

# Classic Schroeder arrangement: four parallel feedback combs into two
# series allpasses. Delays in seconds; tuned mutually prime in samples.
COMB_DELAYS_S = (0.0297, 0.0371, 0.0411, 0.0437)
ALLPASS_DELAYS_S = (0.0050, 0.0017)
ALLPASS_GAIN = 0.7


def _coprime_delays(delays_s, sample_rate: int) -> list[int]:
    """Delay lengths in samples, nudged up until pairwise coprime."""
    out: list[int] = []
    for d in delays_s:
        n = max(2, int(round(d * sample_rate)))
        while any(math.gcd(n, m) != 1 for m in out):
            n += 1
        out.append(n)
    return out


class _StatefulFilter:
    def __init__(self, b, a):
        self.b, self.a = np.asarray(b, dtype=float), np.asarray(a, dtype=float)
        self.zi = lfiltic(self.b, self.a, [], [])

    def process(self, x: np.ndarray) -> np.ndarray:
        y, self.zi = lfilter(self.b, self.a, x, zi=self.zi)
        return y


class ReverbState:
    """Streaming Schroeder reverb. decay_s sets each comb's feedback so its
    ring-down hits -60 dB at decay_s."""

    def __init__(self, sample_rate: int, mix: float, decay_s: float):
        if not (0.0 <= mix <= 1.0):
            raise ValueError("mix must lie in [0, 1]")
        if not (0.1 <= decay_s <= 10.0):
            raise ValueError("decay_s must lie in [0.1, 10]")
        self.mix = mix
        self.decay_s = decay_s
        self.combs = []
        for d in _coprime_delays(COMB_DELAYS_S, sample_rate):
            g = 10.0 ** (-3.0 * d / (decay_s * sample_rate))
            a = np.zeros(d + 1)
            a[0], a[-1] = 1.0, -g
            self.combs.append(_StatefulFilter([1.0], a))
        self.allpasses = []
        for d in _coprime_delays(ALLPASS_DELAYS_S, sample_rate):
            g = ALLPASS_GAIN
            b = np.zeros(d + 1)
            b[0], b[-1] = -g, 1.0
            a = np.zeros(d + 1)
            a[0], a[-1] = 1.0, -g
            self.allpasses.append(_StatefulFilter(b, a))

    def process(self, x: np.ndarray) -> np.ndarray:
        if self.mix == 0.0:
            return x
        wet = sum(c.process(x) for c in self.combs) / len(self.combs)
        for ap in self.allpasses:
            wet = ap.process(wet)
        return (1.0 - self.mix) * x + self.mix * wet


def plate_reverb(buffer: AudioBuffer, mix: float, decay_s: float) -> AudioBuffer:
    """Offline form; output length equals input length (tail truncated)."""
    if len(buffer) == 0:
        raise ValueError("empty buffer")
    state = ReverbState(buffer.sample_rate, mix, decay_s)
    return AudioBuffer(state.process(buffer.samples), buffer.sample_rate)


class AmpModState:
    """Streaming random gain: breakpoints every 1/rate_hz seconds, each drawn
    uniformly in [1-depth, 1+depth] from a per-breakpoint seeded stream, with
    linear interpolation between them. Keying gains to the breakpoint index
    makes chunked and offline processing identical."""

    def __init__(self, sample_rate: int, depth: float, rate_hz: float, seed: int):
        if not (0.0 <= depth <= 1.0):
            raise ValueError("depth must lie in [0, 1]")
        if not (0.1 <= rate_hz <= 50.0):
            raise ValueError("rate_hz must lie in [0.1, 50]")
        self.sample_rate = sample_rate
        self.depth = depth
        self.rate_hz = rate_hz
        self.seed = int(seed)
        self._cursor = 0

    def _gain_at_breakpoint(self, k: int) -> float:
        rng = np.random.default_rng(np.random.SeedSequence([self.seed, int(k)]))
        return float(rng.uniform(1.0 - self.depth, 1.0 + self.depth))

    def _gain_curve(self, start_sample: int, n: int) -> np.ndarray:
        t = (start_sample + np.arange(n)) / self.sample_rate * self.rate_hz
        k0 = int(np.floor(t[0]))
        k1 = int(np.floor(t[-1])) + 1
        knots = np.arange(k0, k1 + 1)
        gains = np.array([self._gain_at_breakpoint(k) for k in knots])
        return np.interp(t, knots, gains)

    def process(self, x: np.ndarray) -> np.ndarray:
        start = self._cursor
        self._cursor += len(x)
        if self.depth == 0.0 or len(x) == 0:
            return x
        return x * self._gain_curve(start, len(x))


def random_amp_mod(buffer: AudioBuffer, depth: float, rate_hz: float,
                   seed: int) -> AudioBuffer:
    """Offline form of the random amplitude modulator."""
    state = AmpModState(buffer.sample_rate, depth, rate_hz, seed)
    return AudioBuffer(state.process(buffer.samples), buffer.sample_rate)
