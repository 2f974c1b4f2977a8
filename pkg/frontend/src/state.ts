// UI state lives in one immutable object driven by a pure reducer.
// Server events are the only source of displayed truth; locally initiated
// controls only mark fields "pending" until a state event confirms them.

import type {
  ControlMessage,
  EngineSnapshot,
  PredictionEvent,
  ServerEvent,
} from "./protocol.js";

export const HISTORY_LIMIT = 120;

export type ConnectionStatus = "connecting" | "open" | "closed";

export interface PendingControls {
  target?: number;
  mode?: string;
  reverb_mix?: number;
  reverb_decay?: number;
  amp_depth?: number;
  amp_rate?: number;
  running?: boolean;
}

export interface Toast {
  id: number;
  text: string;
}

export interface UiState {
  connection: ConnectionStatus;
  protocolVersion: number | null;
  engine: EngineSnapshot | null;
  latest: PredictionEvent | null;
  history: PredictionEvent[]; // ring of the last HISTORY_LIMIT emissions
  pending: PendingControls;
  toasts: Toast[];
  reconnectDelayMs: number;
}

export type UiEvent =
  | { kind: "socket"; status: ConnectionStatus; reconnectDelayMs?: number }
  | { kind: "server"; event: ServerEvent }
  | { kind: "sent"; control: ControlMessage };

export function initialState(): UiState {
  return {
    connection: "connecting",
    protocolVersion: null,
    engine: null,
    latest: null,
    history: [],
    pending: {},
    toasts: [],
    reconnectDelayMs: 0,
  };
}

let toastCounter = 0;

function approx(a: number | undefined, b: number): boolean {
  return a !== undefined && Math.abs(a - b) < 1e-9;
}

function clearAcknowledged(pending: PendingControls, s: EngineSnapshot): PendingControls {
  const next: PendingControls = { ...pending };
  if (next.target !== undefined && s.target === next.target) delete next.target;
  if (next.mode !== undefined && s.mode === next.mode) delete next.mode;
  if (approx(next.reverb_mix, s.reverb.mix)) delete next.reverb_mix;
  if (approx(next.reverb_decay, s.reverb.decay_s)) delete next.reverb_decay;
  if (approx(next.amp_depth, s.amp_mod.depth)) delete next.amp_depth;
  if (approx(next.amp_rate, s.amp_mod.rate_hz)) delete next.amp_rate;
  if (next.running !== undefined && s.running === next.running) delete next.running;
  return next;
}

function notePending(pending: PendingControls, control: ControlMessage): PendingControls {
  const next = { ...pending };
  switch (control.type) {
    case "set_target":
      next.target = control.label;
      break;
    case "set_mode":
      next.mode = control.mode;
      break;
    case "set_bias":
      for (const key of ["reverb_mix", "reverb_decay", "amp_depth", "amp_rate"] as const) {
        if (control[key] !== undefined) next[key] = control[key];
      }
      break;
    case "start":
      next.running = true;
      break;
    case "stop":
      next.running = false;
      break;
  }
  return next;
}

export function reduce(state: UiState, event: UiEvent): UiState {
  switch (event.kind) {
    case "socket": {
      const next: UiState = {
        ...state,
        connection: event.status,
        reconnectDelayMs: event.reconnectDelayMs ?? state.reconnectDelayMs,
      };
      if (event.status !== "open") next.protocolVersion = null;
      return next;
    }
    case "sent":
      return { ...state, pending: notePending(state.pending, event.control) };
    case "server": {
      const msg = event.event;
      if (msg.type === "hello") {
        return { ...state, protocolVersion: msg.version };
      }
      if (msg.type === "prediction") {
        const history = [...state.history, msg];
        if (history.length > HISTORY_LIMIT) {
          history.splice(0, history.length - HISTORY_LIMIT);
        }
        return { ...state, latest: msg, history };
      }
      if (msg.type === "state") {
        return {
          ...state,
          engine: msg.state,
          pending: clearAcknowledged(state.pending, msg.state),
        };
      }
      if (msg.type === "error") {
        const toasts = [...state.toasts, { id: toastCounter++, text: `${msg.code}: ${msg.text}` }];
        if (toasts.length > 5) toasts.splice(0, toasts.length - 5);
        return { ...state, toasts };
      }
      return state;
    }
  }
}
