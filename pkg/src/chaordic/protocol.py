"""Wire protocol: JSON text messages over a WebSocket.

Controls flow client -> server, events server -> client. parse_control
normalizes and validates; serialize emits canonical text (sorted keys), so
serialize(parse(text)) is idempotent on well-formed messages.
"""

from __future__ import annotations

import json

PROTOCOL_VERSION = 1

MODES = ("manual", "match", "opposite", "automation")

_BIAS_FIELDS = {
    "reverb_mix": (0.0, 1.0),
    "reverb_decay": (0.1, 10.0),
    "amp_depth": (0.0, 1.0),
    "amp_rate": (0.1, 50.0),
}


class ProtocolError(ValueError):
    def __init__(self, code: str, text: str):
        super().__init__(text)
        self.code = code
        self.text = text


def serialize(message: dict) -> str:
    return json.dumps(message, sort_keys=True, separators=(",", ":"))


def parse_control(text: str | dict) -> dict:
    """Validate one incoming control message and return its normal form."""
    if isinstance(text, (str, bytes)):
        try:
            raw = json.loads(text)
        except json.JSONDecodeError as exc:
            raise ProtocolError("bad_json", f"not valid JSON: {exc}") from exc
    else:
        raw = text
    if not isinstance(raw, dict) or "type" not in raw:
        raise ProtocolError("bad_message", "control messages are objects with a 'type'")
    kind = raw["type"]
    if kind == "set_target":
        try:
            label = int(raw["label"])
        except (KeyError, TypeError, ValueError):
            raise ProtocolError("bad_field", "set_target needs an integer 'label'")
        if not (0 <= label <= 10):
            raise ProtocolError("out_of_range", f"target {label} out of range 0..10")
        return {"type": "set_target", "label": label}
    if kind == "set_mode":
        mode = raw.get("mode")
        if mode not in MODES:
            raise ProtocolError("out_of_range", f"mode must be one of {MODES}")
        return {"type": "set_mode", "mode": mode}
    if kind == "set_bias":
        out = {"type": "set_bias"}
        extras = set(raw) - {"type", *_BIAS_FIELDS}
        if extras:
            raise ProtocolError("bad_field", f"unknown set_bias fields: {sorted(extras)}")
        for name, (lo, hi) in _BIAS_FIELDS.items():
            if name not in raw:
                continue
            try:
                value = float(raw[name])
            except (TypeError, ValueError):
                raise ProtocolError("bad_field", f"{name} must be a number")
            if not (lo <= value <= hi):
                raise ProtocolError("out_of_range", f"{name}={value} out of range [{lo}, {hi}]")
            out[name] = value
        if len(out) == 1:
            raise ProtocolError("bad_field", "set_bias carries no settings")
        return out
    if kind == "set_automation":
        raw_bps = raw.get("breakpoints")
        if not isinstance(raw_bps, list):
            raise ProtocolError("bad_field", "set_automation needs a 'breakpoints' list")
        breakpoints = []
        for bp in raw_bps:
            try:
                t, label = float(bp[0]), int(bp[1])
            except (TypeError, ValueError, IndexError):
                raise ProtocolError("bad_field", "breakpoints are [time_s, label] pairs")
            if t < 0 or not (0 <= label <= 10):
                raise ProtocolError("out_of_range", f"breakpoint {bp} out of range")
            breakpoints.append([t, label])
        times = [t for t, _ in breakpoints]
        if any(b <= a for a, b in zip(times, times[1:])):
            raise ProtocolError("out_of_range", "breakpoint times must be strictly increasing")
        return {"type": "set_automation", "breakpoints": breakpoints}
    if kind in ("start", "stop", "get_state"):
        return {"type": kind}
    raise ProtocolError("bad_message", f"unknown control type {kind!r}")


def hello_event() -> dict:
    return {"type": "hello", "version": PROTOCOL_VERSION}


def prediction_event(payload: dict) -> dict:
    return {"type": "prediction", "timestamp": payload["timestamp"],
            "probs": payload["probs"], "argmax": payload["argmax"]}


def state_event(snapshot: dict) -> dict:
    return {"type": "state", "state": snapshot}


def error_event(code: str, text: str) -> dict:
    return {"type": "error", "code": code, "text": text}
