/**
 * Session protocol types (schema v1), mirroring the server's pydantic models.
 *
 * Every request receives exactly one response; the session is event-sourced
 * on the server, so a recorded request log replays to the same state.
 */

export const PROTOCOL_VERSION = 1;

export type RequestKind =
  | "load"
  | "state"
  | "tactic"
  | "undo"
  | "goals"
  | "varsets"
  | "predeval";

export type ResponseKind = "state" | "goals" | "varsets" | "predeval" | "error";

export interface ProtocolRequest {
  kind: RequestKind;
  payload: Record<string, unknown>;
}

export interface StatePayload {
  text?: string;
  lemmas?: Record<string, number>;
  open_lemma?: string | null;
  admitted_total?: number;
  goals?: string[];
  certificate?: string;
}

export interface ProtocolResponse {
  kind: ResponseKind;
  payload: StatePayload & Record<string, unknown>;
}

export interface SessionCreated {
  session_id: string;
  protocol_version: number;
}

/** One executed command as recorded by the server's event log. */
export type LogEntry = [request: string, responseKind: string, responseText: string];
