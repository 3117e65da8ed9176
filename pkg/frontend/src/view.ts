/**
 * Pure rendering of server responses.
 *
 * Everything shown comes verbatim from the server payloads; the view never
 * derives proof state client-side, so disabling the client cannot change
 * what is provable.
 */

import type { ProtocolResponse, StatePayload } from "./protocol.js";

export interface SessionView {
  goals: string[];
  openLemma: string | null;
  lemmas: Record<string, number>;
  admitted: number;
  lastMessage: string;
  lastError: string | null;
  varsetsPanel: string;
  predicatePanel: string;
  history: string[];
}

export function emptyView(): SessionView {
  return {
    goals: [],
    openLemma: null,
    lemmas: {},
    admitted: 0,
    lastMessage: "",
    lastError: null,
    varsetsPanel: "",
    predicatePanel: "",
    history: [],
  };
}

/** Fold one response into the view; state payloads replace, never merge. */
export function applyResponse(view: SessionView, command: string | null, res: ProtocolResponse): SessionView {
  const next: SessionView = { ...view, lastError: null };
  if (command !== null && res.kind !== "error") {
    next.history = [...view.history, command];
  }
  const p = res.payload as StatePayload;
  if (res.kind === "error") {
    next.lastError = String(p.text ?? "unknown error");
    if (p.goals) next.goals = p.goals;
    return next;
  }
  if (res.kind === "varsets") {
    next.varsetsPanel = String(p.text ?? "");
    return next;
  }
  if (res.kind === "predeval") {
    next.predicatePanel = String(p.text ?? "");
    return next;
  }
  if (p.goals !== undefined) next.goals = p.goals;
  if (p.open_lemma !== undefined) next.openLemma = p.open_lemma ?? null;
  if (p.lemmas !== undefined) next.lemmas = p.lemmas;
  if (p.admitted_total !== undefined) next.admitted = p.admitted_total;
  next.lastMessage = String(p.text ?? "");
  return next;
}

function escapeHtml(s: string): string {
  return s.replace(/&/g, "&amp;").replace(/</g, "&lt;").replace(/>/g, "&gt;");
}

export function renderGoalStack(view: SessionView): string {
  if (view.goals.length === 0) {
    const done = Object.keys(view.lemmas).length;
    return `<p class="empty">no goals${done ? ` — ${done} lemma(s) proved` : ""}</p>`;
  }
  const items = view.goals
    .map((g, i) => `<li class="goal${i === 0 ? " focused" : ""}"><code>${escapeHtml(g)}</code></li>`)
    .join("");
  return `<ol class="goals">${items}</ol>`;
}

export function renderStatus(view: SessionView): string {
  const parts: string[] = [];
  if (view.openLemma) parts.push(`lemma <b>${escapeHtml(view.openLemma)}</b> open`);
  for (const [name, admits] of Object.entries(view.lemmas)) {
    parts.push(`${escapeHtml(name)}: proved${admits ? ` (${admits} admitted)` : ""}`);
  }
  if (view.lastError) parts.push(`<span class="error">${escapeHtml(view.lastError)}</span>`);
  else if (view.lastMessage) parts.push(escapeHtml(view.lastMessage.split("\n")[0]));
  return parts.join(" · ");
}

export function renderHistory(view: SessionView): string {
  return view.history.map((c) => `<li><code>${escapeHtml(c)}.</code></li>`).join("");
}

export function renderPanel(text: string): string {
  return `<pre>${escapeHtml(text)}</pre>`;
}
