// DOM control panel. render() is idempotent over UiState; controls that are
// awaiting server confirmation carry the "pending" class so the operator can
// tell displayed truth from hopeful writes.

import type { ControlMessage, Mode } from "./protocol.js";
import { MODES } from "./protocol.js";
import type { UiState } from "./state.js";
import { HISTORY_LIMIT } from "./state.js";

export type Dispatch = (control: ControlMessage) => void;

function el<K extends keyof HTMLElementTagNameMap>(
  tag: K,
  attrs: Record<string, string> = {},
  ...children: (HTMLElement | string)[]
): HTMLElementTagNameMap[K] {
  const node = document.createElement(tag);
  for (const [k, v] of Object.entries(attrs)) node.setAttribute(k, v);
  for (const child of children) node.append(child);
  return node;
}

export interface View {
  render(state: UiState): void;
  root: HTMLElement;
}

export function createView(root: HTMLElement, dispatch: Dispatch): View {
  const banner = el("div", { class: "banner", id: "connection" });

  const targetValue = el("span", { id: "target-value" }, "5");
  const targetSlider = el("input", {
    id: "target",
    type: "range",
    min: "0",
    max: "10",
    step: "1",
    value: "5",
  });
  targetSlider.addEventListener("input", () => {
    targetValue.textContent = targetSlider.value;
    dispatch({ type: "set_target", label: Number(targetSlider.value) });
  });

  const modeSelect = el("select", { id: "mode" });
  for (const mode of MODES) {
    modeSelect.append(el("option", { value: mode }, mode));
  }
  modeSelect.addEventListener("change", () => {
    dispatch({ type: "set_mode", mode: modeSelect.value as Mode });
  });

  const automationInput = el("textarea", {
    id: "automation",
    rows: "3",
    placeholder: "time_s,label per line",
  });
  const automationApply = el("button", { id: "automation-apply" }, "apply automation");
  const automationError = el("span", { id: "automation-error", class: "field-error" });
  automationApply.addEventListener("click", () => {
    const breakpoints: [number, number][] = [];
    automationError.textContent = "";
    for (const line of automationInput.value.split("\n")) {
      const trimmed = line.trim();
      if (!trimmed) continue;
      const [t, label] = trimmed.split(/[\s,]+/).map(Number);
      if (!Number.isFinite(t) || !Number.isInteger(label)) {
        automationError.textContent = `cannot parse "${trimmed}"`;
        return;
      }
      breakpoints.push([t, label]);
    }
    dispatch({ type: "set_automation", breakpoints });
  });

  function knob(id: string, label: string, min: number, max: number, step: number,
                send: (value: number) => ControlMessage): HTMLElement {
    const input = el("input", {
      id,
      type: "range",
      min: String(min),
      max: String(max),
      step: String(step),
      value: String(min),
    });
    const value = el("span", { id: `${id}-value` }, String(min));
    input.addEventListener("input", () => {
      value.textContent = input.value;
      dispatch(send(Number(input.value)));
    });
    return el("label", { class: "knob", for: id }, label, input, value);
  }

  const startButton = el("button", { id: "start" }, "start");
  startButton.addEventListener("click", () => dispatch({ type: "start" }));
  const stopButton = el("button", { id: "stop" }, "stop");
  stopButton.addEventListener("click", () => dispatch({ type: "stop" }));

  const bars = el("div", { id: "probs", class: "bars" });
  for (let i = 0; i <= 10; i++) {
    const bar = el("div", { class: "bar", "data-label": String(i) });
    bar.append(el("div", { class: "bar-fill", style: "height:0%" }));
    bar.append(el("span", { class: "bar-label" }, String(i)));
    bars.append(bar);
  }

  const timeline = el("div", { id: "timeline", class: "timeline" });
  const statusLine = el("div", { id: "status-line" });
  const toasts = el("div", { id: "toasts" });

  root.append(
    banner,
    el("section", { class: "panel" },
      el("h2", {}, "target order"),
      el("label", { for: "target" }, "order level ", targetValue),
      targetSlider,
      el("label", { for: "mode" }, "mode"),
      modeSelect,
      automationInput,
      automationApply,
      automationError,
      startButton,
      stopButton,
    ),
    el("section", { class: "panel" },
      el("h2", {}, "bias processors"),
      knob("reverb-mix", "reverb mix", 0, 1, 0.01,
        (v) => ({ type: "set_bias", reverb_mix: v })),
      knob("reverb-decay", "reverb decay (s)", 0.1, 10, 0.1,
        (v) => ({ type: "set_bias", reverb_decay: v })),
      knob("amp-depth", "amp-mod depth", 0, 1, 0.01,
        (v) => ({ type: "set_bias", amp_depth: v })),
      knob("amp-rate", "amp-mod rate (Hz)", 0.1, 50, 0.1,
        (v) => ({ type: "set_bias", amp_rate: v })),
    ),
    el("section", { class: "panel" },
      el("h2", {}, "live prediction"),
      bars,
      el("h2", {}, "predicted-label timeline"),
      timeline,
      statusLine,
    ),
    toasts,
  );

  function render(state: UiState): void {
    banner.textContent =
      state.connection === "open"
        ? `connected (protocol v${state.protocolVersion ?? "?"})`
        : state.connection === "connecting"
          ? "connecting…"
          : `disconnected — retrying in ${Math.round(state.reconnectDelayMs / 100) / 10}s`;
    banner.className = `banner ${state.connection}`;

    const engine = state.engine;
    if (engine) {
      if (document.activeElement !== targetSlider) {
        const shown = state.pending.target ?? engine.target;
        targetSlider.value = String(shown);
        targetValue.textContent = String(shown);
      }
      targetSlider.classList.toggle("pending", state.pending.target !== undefined);
      if (document.activeElement !== modeSelect) {
        modeSelect.value = state.pending.mode ?? engine.mode;
      }
      modeSelect.classList.toggle("pending", state.pending.mode !== undefined);
      const knobValues: [string, number, boolean][] = [
        ["reverb-mix", engine.reverb.mix, state.pending.reverb_mix !== undefined],
        ["reverb-decay", engine.reverb.decay_s, state.pending.reverb_decay !== undefined],
        ["amp-depth", engine.amp_mod.depth, state.pending.amp_depth !== undefined],
        ["amp-rate", engine.amp_mod.rate_hz, state.pending.amp_rate !== undefined],
      ];
      for (const [id, value, pending] of knobValues) {
        const input = root.querySelector<HTMLInputElement>(`#${id}`);
        const shown = root.querySelector(`#${id}-value`);
        if (input && document.activeElement !== input && !pending) {
          input.value = String(value);
          if (shown) shown.textContent = String(Math.round(value * 100) / 100);
        }
        input?.classList.toggle("pending", pending);
      }
      startButton.classList.toggle("active", engine.running);
      stopButton.classList.toggle("active", !engine.running);
      statusLine.textContent =
        `mode ${engine.mode} · target ${engine.target} · t=${engine.t_s.toFixed(1)}s` +
        ` · cycles ${engine.cycles}` +
        (engine.last_error ? ` · error: ${engine.last_error}` : "");
    }

    if (state.latest) {
      const fills = bars.querySelectorAll<HTMLElement>(".bar-fill");
      state.latest.probs.forEach((p, i) => {
        const fill = fills[i];
        if (fill) fill.style.height = `${Math.round(p * 100)}%`;
        const bar = fill?.parentElement;
        bar?.classList.toggle("argmax", i === state.latest!.argmax);
      });
    }

    timeline.replaceChildren(
      ...state.history.slice(-HISTORY_LIMIT).map((p) => {
        const tick = el("div", {
          class: "tick",
          "data-label": String(p.argmax),
          style: `height:${(p.argmax / 10) * 100}%`,
          title: `t=${p.timestamp.toFixed(2)}s → ${p.argmax}`,
        });
        return tick;
      }),
    );

    toasts.replaceChildren(
      ...state.toasts.map((t) => el("div", { class: "toast" }, t.text)),
    );
  }

  return { render, root };
}
