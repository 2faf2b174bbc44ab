/**
 * Transcript model: what the chat pane renders.
 *
 * Entries mirror the service's own session history, which is the source
 * of truth — after a reload the whole transcript is rebuilt from
 * `GET /sessions/{id}`, so nothing the user saw lives only in the page.
 */

import type { Evidence, HistoryEntry, ResponseKind } from "./api.js";

export interface TranscriptEntry {
  direction: "user" | "agent";
  text: string;
  /** Response kind for agent entries; null for user entries. */
  kind: ResponseKind | null;
  timestamp: string;
  /** Receipts behind the text: canonical plans plus result tables. */
  evidence: Evidence[];
}

export function userEntry(text: string, timestamp: string): TranscriptEntry {
  return { direction: "user", text, kind: null, timestamp, evidence: [] };
}

export function agentEntry(
  text: string,
  kind: ResponseKind,
  timestamp: string,
  evidence: Evidence[],
): TranscriptEntry {
  return { direction: "agent", text, kind, timestamp, evidence };
}

/** Rebuild the transcript, in arrival order, from stored session history. */
export function entriesFromHistory(
  history: HistoryEntry[],
): TranscriptEntry[] {
  return history.map((turn) =>
    turn.role === "user"
      ? userEntry(turn.text, turn.timestamp)
      : agentEntry(
          turn.text,
          turn.kind ?? "chat",
          turn.timestamp,
          turn.response?.evidence ?? [],
        ),
  );
}
