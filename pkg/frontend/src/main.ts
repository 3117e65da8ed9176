/**
 * Browser entry point: wires the session client to the DOM.
 *
 * Optimistic UI is deliberately absent: every render happens after the
 * server's response arrives, so the screen always equals the server state.
 */

import { SessionClient, equalCommand } from "./client.js";
import {
  SessionView,
  applyResponse,
  emptyView,
  renderGoalStack,
  renderHistory,
  renderPanel,
  renderStatus,
} from "./view.js";

function el<T extends HTMLElement>(id: string): T {
  const node = document.getElementById(id);
  if (!node) throw new Error(`missing element #${id}`);
  return node as T;
}

let client: SessionClient | null = null;
let view: SessionView = emptyView();

function render(): void {
  el("goals").innerHTML = renderGoalStack(view);
  el("status").innerHTML = renderStatus(view);
  el("history").innerHTML = renderHistory(view);
  el("varsets-panel").innerHTML = renderPanel(view.varsetsPanel);
  el("pred-panel").innerHTML = renderPanel(view.predicatePanel);
}

async function refresh(command: string | null, resPromise: Promise<any>): Promise<void> {
  const res = await resPromise;
  view = applyResponse(view, command, res);
  render();
}

async function connect(): Promise<void> {
  const endpoint = (el<HTMLInputElement>("endpoint")).value.replace(/\/$/, "");
  client = new SessionClient(endpoint);
  await client.connect();
  view = emptyView();
  await refresh(null, client.state());
}

async function runCommand(text: string): Promise<void> {
  if (!client) return;
  const trimmed = text.trim().replace(/\.$/, "");
  if (!trimmed) return;
  await refresh(trimmed, client.command(trimmed));
}

export function setup(): void {
  el("connect").addEventListener("click", () => void connect());
  el("send").addEventListener("click", () => {
    const input = el<HTMLInputElement>("command");
    void runCommand(input.value).then(() => {
      input.value = "";
    });
  });
  el("undo").addEventListener("click", () => {
    if (client) void refresh(null, client.undo());
  });
  el("equal-apply").addEventListener("click", () => {
    const vmid = el<HTMLInputElement>("equal-vmid").value.split(",").map((s) => s.trim()).filter(Boolean);
    void runCommand(equalCommand(vmid.length ? vmid : undefined));
  });
  el("varsets-run").addEventListener("click", () => {
    if (client) void refresh(null, client.varsets(el<HTMLInputElement>("varsets-input").value));
  });
  el("pred-run").addEventListener("click", () => {
    if (client) void refresh(null, client.predeval(el<HTMLInputElement>("pred-input").value));
  });
  el("export").addEventListener("click", () => {
    if (!client) return;
    const blob = new Blob([client.replayScript()], { type: "text/plain" });
    const a = document.createElement("a");
    a.href = URL.createObjectURL(blob);
    a.download = "session.qrhl";
    a.click();
  });
  for (const btn of Array.from(document.querySelectorAll<HTMLButtonElement>("button[data-tactic]"))) {
    btn.addEventListener("click", () => void runCommand(btn.dataset.tactic ?? ""));
  }
}

if (typeof document !== "undefined" && document.readyState !== "loading") {
  setup();
} else if (typeof document !== "undefined") {
  document.addEventListener("DOMContentLoaded", setup);
}
