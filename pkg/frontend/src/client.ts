/**
 * Thin HTTP client for the session protocol.
 *
 * The client performs no proof logic whatsoever: it forwards commands and
 * renders whatever the server answers.  It also records every command it
 * sends, so a UI session can be replayed as a batch script.
 */

import type { LogEntry, ProtocolRequest, ProtocolResponse, SessionCreated } from "./protocol.js";

export class ServerError extends Error {
  constructor(message: string, readonly response?: ProtocolResponse) {
    super(message);
  }
}

export class SessionClient {
  private session: string | null = null;
  /** Commands sent through `command()`, in order; the replayable session. */
  readonly recorded: string[] = [];

  constructor(readonly endpoint: string) {}

  private async http<T>(method: string, path: string, body?: unknown): Promise<T> {
    const res = await fetch(this.endpoint + path, {
      method,
      headers: { "Content-Type": "application/json" },
      body: body === undefined ? undefined : JSON.stringify(body),
    });
    if (!res.ok) {
      throw new ServerError(`HTTP ${res.status} for ${path}`);
    }
    return (await res.json()) as T;
  }

  async connect(): Promise<string> {
    const created = await this.http<SessionCreated>("POST", "/sessions");
    this.session = created.session_id;
    return created.session_id;
  }

  get sessionId(): string {
    if (this.session === null) throw new ServerError("not connected");
    return this.session;
  }

  async send(req: ProtocolRequest): Promise<ProtocolResponse> {
    return this.http<ProtocolResponse>("POST", `/sessions/${this.sessionId}/message`, req);
  }

  /** Execute one '.'-terminated command (without the dot). */
  async command(text: string): Promise<ProtocolResponse> {
    const res = await this.send({ kind: "tactic", payload: { command: text } });
    if (res.kind !== "error") this.recorded.push(text);
    return res;
  }

  async state(): Promise<ProtocolResponse> {
    return this.send({ kind: "state", payload: {} });
  }

  async undo(): Promise<ProtocolResponse> {
    const res = await this.send({ kind: "undo", payload: {} });
    if (res.kind !== "error" && this.recorded.length > 0) this.recorded.pop();
    return res;
  }

  async varsets(program: string): Promise<ProtocolResponse> {
    return this.send({ kind: "varsets", payload: { program } });
  }

  async predeval(pred: string): Promise<ProtocolResponse> {
    return this.send({ kind: "predeval", payload: { pred } });
  }

  async log(): Promise<LogEntry[]> {
    const res = await this.http<{ entries: LogEntry[] }>("GET", `/sessions/${this.sessionId}/log`);
    return res.entries;
  }

  /** The recorded UI session as a batch proof script. */
  replayScript(): string {
    return this.recorded.map((c) => c + ".").join("\n") + "\n";
  }
}

/** Build the `equal` tactic command, with the optional Vmid register ordering. */
export function equalCommand(vmid?: string[], vin?: string[], vout?: string[]): string {
  let cmd = "equal";
  if (vmid && vmid.length) cmd += ` mid (${vmid.join(", ")})`;
  if (vin && vin.length) cmd += ` in (${vin.join(", ")})`;
  if (vout && vout.length) cmd += ` out (${vout.join(", ")})`;
  return cmd;
}
