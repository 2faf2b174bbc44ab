import { describe, expect, test } from "vitest";

import type { GroundedResponse, HistoryEntry } from "../../src/api.js";
import { entriesFromHistory } from "../../src/transcript.js";

function groundedResponse(): GroundedResponse {
  return {
    kind: "simple",
    text: "You got 1 hour and 15 minutes of deep sleep last night.",
    evidence: [
      {
        plan: "sleep_session | project deep",
        result: {
          columns: [{ name: "deep", type: "float" }],
          rows: [[75.0]],
          row_count: 1,
          provenance: "sleep_session | project deep",
          warnings: [],
        },
      },
    ],
    number_provenance: [],
    request: null,
    trace: [],
  };
}

describe("entriesFromHistory", () => {
  test("keeps arrival order and maps both directions", () => {
    const history: HistoryEntry[] = [
      {
        role: "user",
        text: "How much deep sleep did I get last night?",
        kind: null,
        timestamp: "2025-07-09T12:00:00+00:00",
      },
      {
        role: "agent",
        text: "You got 1 hour and 15 minutes of deep sleep last night.",
        kind: "simple",
        timestamp: "2025-07-09T12:00:00+00:00",
        response: groundedResponse(),
      },
    ];
    const entries = entriesFromHistory(history);
    expect(entries).toHaveLength(2);
    expect(entries[0]?.direction).toBe("user");
    expect(entries[0]?.kind).toBeNull();
    expect(entries[0]?.evidence).toEqual([]);
    expect(entries[1]?.direction).toBe("agent");
    expect(entries[1]?.kind).toBe("simple");
    expect(entries[1]?.evidence).toHaveLength(1);
    expect(entries[1]?.evidence[0]?.plan).toBe("sleep_session | project deep");
  });

  test("agent turns without a stored response render with no receipts", () => {
    const entries = entriesFromHistory([
      {
        role: "agent",
        text: "Happy to help.",
        kind: "chat",
        timestamp: "t",
      },
    ]);
    expect(entries[0]?.evidence).toEqual([]);
  });

  test("a missing kind on an agent turn falls back to small talk", () => {
    const entries = entriesFromHistory([
      { role: "agent", text: "Hello!", kind: null, timestamp: "t" },
    ]);
    expect(entries[0]?.kind).toBe("chat");
  });

  test("an empty history yields an empty transcript", () => {
    expect(entriesFromHistory([])).toEqual([]);
  });
});
