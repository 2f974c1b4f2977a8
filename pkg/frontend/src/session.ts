// WebSocket session: owns the socket, feeds the reducer, reconnects with
// exponential backoff. The socket constructor is injectable so tests can
// script the server side.

import type { ControlMessage } from "./protocol.js";
import { parseServerEvent, validateControl } from "./protocol.js";
import type { UiState } from "./state.js";
import { initialState, reduce } from "./state.js";

export interface SocketLike {
  send(text: string): void;
  close(): void;
  onopen: ((ev?: unknown) => void) | null;
  onclose: ((ev?: unknown) => void) | null;
  onmessage: ((ev: { data: unknown }) => void) | null;
}

export type SocketFactory = (url: string) => SocketLike;

export interface SessionOptions {
  socketFactory?: SocketFactory;
  minBackoffMs?: number;
  maxBackoffMs?: number;
  onChange?: (state: UiState) => void;
  onInvalidControl?: (reason: string) => void;
}

const defaultFactory: SocketFactory = (url) =>
  new WebSocket(url) as unknown as SocketLike;

export class Session {
  state: UiState = initialState();
  private socket: SocketLike | null = null;
  private backoffMs: number;
  private closed = false;
  private reconnectTimer: ReturnType<typeof setTimeout> | null = null;

  constructor(
    private url: string,
    private options: SessionOptions = {},
  ) {
    this.backoffMs = options.minBackoffMs ?? 500;
  }

  private apply(event: Parameters<typeof reduce>[1]): void {
    this.state = reduce(this.state, event);
    this.options.onChange?.(this.state);
  }

  connect(): void {
    if (this.closed) return;
    this.apply({ kind: "socket", status: "connecting" });
    const factory = this.options.socketFactory ?? defaultFactory;
    const sock = factory(this.url);
    this.socket = sock;
    sock.onopen = () => {
      this.backoffMs = this.options.minBackoffMs ?? 500;
      this.apply({ kind: "socket", status: "open", reconnectDelayMs: 0 });
    };
    sock.onmessage = (ev) => {
      const parsed = parseServerEvent(String(ev.data));
      if (parsed) this.apply({ kind: "server", event: parsed });
    };
    sock.onclose = () => {
      if (this.closed) return;
      const delay = this.backoffMs;
      this.backoffMs = Math.min(
        this.backoffMs * 2,
        this.options.maxBackoffMs ?? 8000,
      );
      this.apply({ kind: "socket", status: "closed", reconnectDelayMs: delay });
      this.reconnectTimer = setTimeout(() => this.connect(), delay);
    };
  }

  dispatch(control: ControlMessage): boolean {
    const problem = validateControl(control);
    if (problem) {
      this.options.onInvalidControl?.(problem);
      return false;
    }
    if (!this.socket || this.state.connection !== "open") return false;
    this.socket.send(JSON.stringify(control));
    this.apply({ kind: "sent", control });
    return true;
  }

  close(): void {
    this.closed = true;
    if (this.reconnectTimer !== null) clearTimeout(this.reconnectTimer);
    this.socket?.close();
  }
}
