"""The closed feedback loop: listen, classify, retarget, synthesize, bias.

One Engine owns the render path. Controls arrive through a message inbox
drained at cycle boundaries; every classification emission appends a record
to the session log, so the full decision trace can be reconstructed. Run
offline (virtual clock, deterministic) or paced against the wall clock.
"""

from __future__ import annotations

import json
import logging
import pathlib
import queue
import threading
import time
from dataclasses import dataclass, field, asdict

import numpy as np

from .audio import AudioBuffer, write_wav
from .effects import AmpModState, ReverbState
from .granular import GranularStream
from .markov import TransitionModel, generate_params
from .net import Network, StreamingPredictor

log = logging.getLogger(__name__)

MODES = ("manual", "match", "opposite", "automation")


class EngineError(RuntimeError):
    pass


@dataclass
class ReverbSettings:
    mix: float = 0.0
    decay_s: float = 1.5

    def validate(self):
        if not (0.0 <= self.mix <= 1.0):
            raise ValueError("reverb mix must lie in [0, 1]")
        if not (0.1 <= self.decay_s <= 10.0):
            raise ValueError("reverb decay_s must lie in [0.1, 10]")


@dataclass
class AmpModSettings:
    depth: float = 0.0
    rate_hz: float = 4.0
    seed: int = 0

    def validate(self):
        if not (0.0 <= self.depth <= 1.0):
            raise ValueError("amp_mod depth must lie in [0, 1]")
        if not (0.1 <= self.rate_hz <= 50.0):
            raise ValueError("amp_mod rate_hz must lie in [0.1, 50]")


@dataclass
class EnvironmentConfig:
    mode: str = "manual"
    manual_target: int = 5
    automation: list = field(default_factory=list)  # [(time_s, label)] ascending
    regen_interval_s: float = 4.0
    reverb: ReverbSettings = field(default_factory=ReverbSettings)
    amp_mod: AmpModSettings = field(default_factory=AmpModSettings)
    classify_hop_s: float = 0.5
    window_s: float = 3.0
    crossfade_s: float = 0.05
    block_size: int = 512
    seed: int = 0

    def __post_init__(self):
        if self.mode not in MODES:
            raise ValueError(f"mode must be one of {MODES}")
        if not (0 <= self.manual_target <= 10):
            raise ValueError("manual_target must lie in 0..10")
        times = [t for t, _ in self.automation]
        if any(b <= a for a, b in zip(times, times[1:])):
            raise ValueError("automation breakpoint times must be strictly increasing")
        for _, label in self.automation:
            if not (0 <= label <= 10):
                raise ValueError("automation labels must lie in 0..10")
        if self.regen_interval_s <= 0 or self.classify_hop_s <= 0:
            raise ValueError("intervals must be positive")
        self.reverb.validate()
        self.amp_mod.validate()

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, d: dict) -> "EnvironmentConfig":
        d = dict(d)
        if "reverb" in d:
            d["reverb"] = ReverbSettings(**d["reverb"])
        if "amp_mod" in d:
            d["amp_mod"] = AmpModSettings(**d["amp_mod"])
        if "automation" in d:
            d["automation"] = [tuple(bp) for bp in d["automation"]]
        return cls(**d)


def target_from_prediction(mode: str, predicted: int, config: EnvironmentConfig,
                           t_s: float = 0.0) -> int:
    """Pure mapping from the latest prediction to the synthesis target."""
    if mode == "manual":
        return config.manual_target
    if mode == "match":
        return predicted
    if mode == "opposite":
        return 10 - predicted
    if mode == "automation":
        if not config.automation:
            return config.manual_target
        current = config.automation[0][1]
        for t, label in config.automation:
            if t_s >= t:
                current = label
            else:
                break
        return int(current)
    raise ValueError(f"unknown mode {mode}")


# ---------------------------------------------------------------------------
# sinks


class NullSink:
    def write(self, block: np.ndarray) -> None:
        pass

    def close(self) -> None:
        pass


class WavWriterSink:
    def __init__(self, path, sample_rate: int = 22050):
        self.path = path
        self.sample_rate = sample_rate
        self._blocks: list[np.ndarray] = []

    def write(self, block: np.ndarray) -> None:
        self._blocks.append(np.asarray(block, dtype=np.float64))

    def close(self) -> None:
        samples = np.concatenate(self._blocks) if self._blocks else np.zeros(0)
        write_wav(self.path, AudioBuffer(samples, self.sample_rate))


class DeviceSink:
    """Plays to the system audio device; needs the optional sounddevice
    package and working hardware, neither of which this build assumes."""

    def __init__(self, sample_rate: int = 22050):
        try:
            import sounddevice  # noqa: F401
        except ImportError as exc:
            raise EngineError(
                "audio device output requires the optional 'sounddevice' package"
            ) from exc
        import sounddevice as sd

        self._stream = sd.OutputStream(samplerate=sample_rate, channels=1)
        self._stream.start()

    def write(self, block: np.ndarray) -> None:
        self._stream.write(np.asarray(block, dtype=np.float32))

    def close(self) -> None:
        self._stream.stop()
        self._stream.close()


# ---------------------------------------------------------------------------
# engine


@dataclass
class EnvironmentState:
    running: bool
    mode: str
    target: int
    latest_prediction: dict | None
    params: dict | None
    reverb: dict
    amp_mod: dict
    automation: list
    t_s: float
    cycles: int
    last_error: str | None = None


class Engine:
    """Owner of the render path and the single serialization point for state.

    input_buffer=None means self-listening: the classifier hears the engine's
    own post-effects output. With a buffer, the engine classifies that
    material instead (looped), standing in for a microphone.
    """

    def __init__(
        self,
        net: Network,
        model: TransitionModel,
        source: AudioBuffer,
        config: EnvironmentConfig,
        sink=None,
        input_buffer: AudioBuffer | None = None,
        autostart: bool = True,
    ):
        if net is None or model is None:
            raise EngineError("refusing to start: classifier and transition model required")
        if len(source) == 0:
            raise EngineError("refusing to start: empty synthesis source")
        self.net = net
        self.model = model
        self.source = source
        self.config = config
        self.sink = sink or NullSink()
        self.input_buffer = input_buffer
        self.sample_rate = source.sample_rate
        self.inbox: queue.Queue = queue.Queue()
        self.listeners: list = []
        self.session_log: list[dict] = []
        self._stop = threading.Event()

        self._playing = autostart
        self._t = 0  # samples rendered
        self._cycles = 0
        self._regen_count = 0
        self._last_regen_t = 0
        self._latest = None  # latest prediction dict
        self._last_error = None

        self.predictor = StreamingPredictor(
            net, self.sample_rate, window_s=config.window_s, hop_s=config.classify_hop_s)
        self._reverb = ReverbState(self.sample_rate, config.reverb.mix, config.reverb.decay_s)
        self._ampmod = AmpModState(self.sample_rate, config.amp_mod.depth,
                                   config.amp_mod.rate_hz, config.amp_mod.seed)
        self._target = target_from_prediction(config.mode, config.manual_target, config, 0.0)
        self._stream: GranularStream | None = None
        self._old_stream: GranularStream | None = None
        self._fade_total = max(1, int(round(config.crossfade_s * self.sample_rate)))
        self._fade_done = 0
        self._params = None
        self._regen("startup")

    # -- events ---------------------------------------------------------------

    def subscribe(self, listener) -> None:
        self.listeners.append(listener)

    def _emit(self, kind: str, payload: dict) -> None:
        for listener in list(self.listeners):
            try:
                listener(kind, payload)
            except Exception:
                log.exception("listener failed")

    # -- state ----------------------------------------------------------------

    def state(self) -> EnvironmentState:
        return EnvironmentState(
            running=self._playing,
            mode=self.config.mode,
            target=self._target,
            latest_prediction=self._latest,
            params=self._params.to_dict() if self._params else None,
            reverb=asdict(self.config.reverb),
            amp_mod=asdict(self.config.amp_mod),
            automation=[list(bp) for bp in self.config.automation],
            t_s=self._t / self.sample_rate,
            cycles=self._cycles,
            last_error=self._last_error,
        )

    def _emit_state(self) -> None:
        self._emit("state", asdict(self.state()))

    # -- controls ---------------------------------------------------------------

    def apply_control(self, msg: dict) -> tuple[bool, str | None]:
        """Apply one validated control message. Returns (applied, error)."""
        kind = msg.get("type")
        try:
            if kind == "set_target":
                label = int(msg["label"])
                if not (0 <= label <= 10):
                    raise ValueError(f"target {label} out of range 0..10")
                self.config.manual_target = label
                if self.config.mode == "manual" and label != self._target:
                    self._target = label
                    self._regen("target_change")
            elif kind == "set_mode":
                mode = msg["mode"]
                if mode not in MODES:
                    raise ValueError(f"unknown mode {mode}")
                self.config.mode = mode
            elif kind == "set_automation":
                breakpoints = [(float(t), int(label)) for t, label in msg["breakpoints"]]
                times = [t for t, _ in breakpoints]
                if any(b <= a for a, b in zip(times, times[1:])):
                    raise ValueError("breakpoint times must be strictly increasing")
                for _, label in breakpoints:
                    if not (0 <= label <= 10):
                        raise ValueError(f"breakpoint label {label} out of range 0..10")
                self.config.automation = breakpoints
            elif kind == "set_bias":
                reverb = ReverbSettings(
                    mix=float(msg.get("reverb_mix", self.config.reverb.mix)),
                    decay_s=float(msg.get("reverb_decay", self.config.reverb.decay_s)))
                amp = AmpModSettings(
                    depth=float(msg.get("amp_depth", self.config.amp_mod.depth)),
                    rate_hz=float(msg.get("amp_rate", self.config.amp_mod.rate_hz)),
                    seed=self.config.amp_mod.seed)
                reverb.validate()
                amp.validate()
                if reverb.decay_s != self.config.reverb.decay_s:
                    self._reverb = ReverbState(self.sample_rate, reverb.mix, reverb.decay_s)
                else:
                    self._reverb.mix = reverb.mix
                if (amp.depth, amp.rate_hz) != (self.config.amp_mod.depth,
                                                self.config.amp_mod.rate_hz):
                    fresh = AmpModState(self.sample_rate, amp.depth, amp.rate_hz, amp.seed)
                    fresh._cursor = self._ampmod._cursor
                    self._ampmod = fresh
                self.config.reverb = reverb
                self.config.amp_mod = amp
            elif kind == "start":
                self._playing = True
            elif kind == "stop":
                self._playing = False
            elif kind == "get_state":
                pass  # the state broadcast below is the reply
            else:
                raise ValueError(f"unknown control type {kind}")
        except (KeyError, TypeError, ValueError) as exc:
            return False, str(exc)
        self._log({"event": "control", "t": self._now(), "control": msg})
        self._emit_state()
        return True, None

    def _drain_inbox(self) -> None:
        while True:
            try:
                msg = self.inbox.get_nowait()
            except queue.Empty:
                return
            ok, err = self.apply_control(msg)
            if not ok:
                self._emit("error", {"code": "invalid_control", "text": err})

    # -- synthesis ---------------------------------------------------------------

    def _now(self) -> float:
        return round(self._t / self.sample_rate, 9)

    def _log(self, record: dict) -> None:
        self.session_log.append(record)

    def _regen(self, reason: str) -> None:
        seed_seq = np.random.SeedSequence([self.config.seed, self._regen_count])
        seed = int(np.random.default_rng(seed_seq).integers(0, 2 ** 63))
        self._regen_count += 1
        params = generate_params(self.model, self._target, seed)
        if self._stream is None:
            self._stream = GranularStream(self.source, params, seed)
        else:
            self._old_stream = self._stream
            self._stream = GranularStream(self.source, params, seed)
            self._fade_done = 0
        self._params = params
        self._last_regen_t = self._t
        self._log({"event": "regen", "t": self._now(), "reason": reason,
                   "target": self._target, "params": params.to_dict()})

    def _render_block(self, n: int) -> np.ndarray:
        out = self._stream.render(n)
        if self._old_stream is not None:
            old = self._old_stream.render(n)
            w = np.clip((self._fade_done + 1 + np.arange(n)) / self._fade_total, 0.0, 1.0)
            out = (1.0 - w) * old + w * out
            self._fade_done += n
            if self._fade_done >= self._fade_total:
                self._old_stream = None
        return out

    def _input_block(self, rendered: np.ndarray, n: int) -> np.ndarray:
        if self.input_buffer is None:
            return rendered
        samples = self.input_buffer.samples
        idx = (self._t - n + np.arange(n)) % len(samples)
        return samples[idx]

    def _handle_emission(self, emission) -> None:
        pred = emission.prediction
        self._cycles += 1
        self._latest = {
            "timestamp": emission.timestamp_s,
            "probs": [float(p) for p in pred.probs],
            "argmax": int(pred.label),
            "compute_ms": emission.compute_ms,
        }
        new_target = target_from_prediction(self.config.mode, pred.label,
                                            self.config, emission.timestamp_s)
        retarget = new_target != self._target
        self._target = new_target
        self._log({
            "event": "cycle", "t": emission.timestamp_s, "cycle": self._cycles,
            "prediction": {"argmax": int(pred.label),
                           "probs": [float(p) for p in pred.probs]},
            "target": self._target,
            "params": self._params.to_dict(),
        })
        self._emit("prediction", dict(self._latest))
        if retarget:
            self._regen("target_change")

    def run(self, duration_s: float | None = None, realtime: bool = False) -> None:
        """Drive the loop. Offline mode (realtime=False) renders as fast as
        possible on a virtual clock and is fully deterministic."""
        hop = self.predictor.hop
        wall_start = time.perf_counter()
        end_t = None if duration_s is None else int(round(duration_s * self.sample_rate))
        try:
            while not self._stop.is_set():
                self._drain_inbox()
                if end_t is not None and self._t >= end_t:
                    break
                if not self._playing:
                    if not realtime:
                        break  # offline run: a stopped engine has no work left
                    time.sleep(0.01)
                    continue
                cycle_end = self._t + hop
                if end_t is not None:
                    cycle_end = min(cycle_end, end_t)
                while self._t < cycle_end:
                    n = min(self.config.block_size, cycle_end - self._t)
                    rendered = self._render_block(n)
                    wet = self._reverb.process(rendered)
                    out = self._ampmod.process(wet)
                    try:
                        self.sink.write(out)
                    except Exception as exc:
                        self._last_error = f"audio sink failure: {exc}"
                        self._log({"event": "error", "t": self._now(),
                                   "text": self._last_error})
                        self._emit("error", {"code": "sink_failure",
                                             "text": self._last_error})
                        self._playing = False
                        log.error("%s; stopping cleanly", self._last_error)
                        return
                    self._t += n
                    for emission in self.predictor.push(self._input_block(out, n)):
                        self._handle_emission(emission)
                if (self._t - self._last_regen_t) >= int(
                        self.config.regen_interval_s * self.sample_rate):
                    self._regen("interval")
                if realtime:
                    deadline = wall_start + self._t / self.sample_rate
                    pause = deadline - time.perf_counter()
                    if pause > 0:
                        time.sleep(pause)
        finally:
            self.sink.close()

    def stop(self) -> None:
        self._stop.set()

    def write_session_log(self, path) -> None:
        lines = [json.dumps(record) for record in self.session_log]
        pathlib.Path(path).write_text("\n".join(lines) + ("\n" if lines else ""))


def run_loop(
    net: Network,
    model: TransitionModel,
    source: AudioBuffer,
    config: EnvironmentConfig,
    sink=None,
    inbox: list | None = None,
    duration_s: float | None = None,
    log_path=None,
) -> list[dict]:
    """One-shot loop runner. `inbox` is a list of control messages applied
    before the first cycle. Returns the session log."""
    engine = Engine(net, model, source, config, sink=sink)
    for msg in inbox or []:
        engine.inbox.put(msg)
    engine.run(duration_s=duration_s)
    if log_path is not None:
        engine.write_session_log(log_path)
    return engine.session_log
