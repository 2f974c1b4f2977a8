// Wire protocol mirror: message shapes and the same range validation the
// server applies, so no control ever leaves the client out of range.

export const PROTOCOL_VERSION = 1;

export const MODES = ["manual", "match", "opposite", "automation"] as const;
export type Mode = (typeof MODES)[number];

export interface SetTarget {
  type: "set_target";
  label: number;
}

export interface SetMode {
  type: "set_mode";
  mode: Mode;
}

export interface SetBias {
  type: "set_bias";
  reverb_mix?: number;
  reverb_decay?: number;
  amp_depth?: number;
  amp_rate?: number;
}

export interface SetAutomation {
  type: "set_automation";
  breakpoints: [number, number][]; // [time_s, label], times strictly increasing
}

export interface Simple {
  type: "start" | "stop" | "get_state";
}

export type ControlMessage = SetTarget | SetMode | SetBias | SetAutomation | Simple;

export interface PredictionEvent {
  type: "prediction";
  timestamp: number;
  probs: number[];
  argmax: number;
}

export interface EngineSnapshot {
  running: boolean;
  mode: Mode;
  target: number;
  latest_prediction: unknown;
  params: Record<string, number> | null;
  reverb: { mix: number; decay_s: number };
  amp_mod: { depth: number; rate_hz: number; seed: number };
  t_s: number;
  cycles: number;
  last_error: string | null;
}

export interface StateEvent {
  type: "state";
  state: EngineSnapshot;
}

export interface HelloEvent {
  type: "hello";
  version: number;
}

export interface ErrorEvent {
  type: "error";
  code: string;
  text: string;
}

export type ServerEvent = PredictionEvent | StateEvent | HelloEvent | ErrorEvent;

export const BIAS_RANGES: Record<keyof Omit<SetBias, "type">, [number, number]> = {
  reverb_mix: [0, 1],
  reverb_decay: [0.1, 10],
  amp_depth: [0, 1],
  amp_rate: [0.1, 50],
};

export function validateControl(msg: ControlMessage): string | null {
  if (msg.type === "set_target") {
    if (!Number.isInteger(msg.label) || msg.label < 0 || msg.label > 10) {
      return `target ${msg.label} out of range 0..10`;
    }
  } else if (msg.type === "set_mode") {
    if (!MODES.includes(msg.mode)) return `unknown mode ${msg.mode}`;
  } else if (msg.type === "set_bias") {
    const entries = Object.entries(msg).filter(([k]) => k !== "type");
    if (entries.length === 0) return "set_bias carries no settings";
    for (const [key, value] of entries) {
      const range = BIAS_RANGES[key as keyof typeof BIAS_RANGES];
      if (!range) return `unknown set_bias field ${key}`;
      if (typeof value !== "number" || value < range[0] || value > range[1]) {
        return `${key}=${value} out of range [${range[0]}, ${range[1]}]`;
      }
    }
  } else if (msg.type === "set_automation") {
    let lastT = -Infinity;
    for (const bp of msg.breakpoints) {
      const [t, label] = bp;
      if (!Number.isFinite(t) || t < 0) return `breakpoint time ${t} invalid`;
      if (!Number.isInteger(label) || label < 0 || label > 10) {
        return `breakpoint label ${label} out of range 0..10`;
      }
      if (t <= lastT) return "breakpoint times must be strictly increasing";
      lastT = t;
    }
  }
  return null;
}

export function parseServerEvent(text: string): ServerEvent | null {
  let raw: unknown;
  try {
    raw = JSON.parse(text);
  } catch {
    return null;
  }
  if (typeof raw !== "object" || raw === null || !("type" in raw)) return null;
  const msg = raw as { type: string };
  if (
    msg.type === "prediction" ||
    msg.type === "state" ||
    msg.type === "hello" ||
    msg.type === "error"
  ) {
    return raw as ServerEvent;
  }
  return null;
}
