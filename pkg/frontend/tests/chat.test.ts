import { describe, expect, it } from "vitest";

import type { OutboxMessage } from "../src/api.js";
import {
  chipLabel,
  citationDetailText,
  entryFromReply,
  mergeOutbox,
  validateMessage,
} from "../src/chat.js";

function outboxMessage(id: string, body: string, kind: "text" | "voice" = "text"): OutboxMessage {
  return {
    message_id: id,
    to_phone: "+92300",
    kind,
    body,
    language: "en",
    citations: [],
    sent_at: 1,
  };
}

describe("mergeOutbox", () => {
  it("appends unseen messages and dedupes by id", () => {
    const entries = [entryFromReply({ text: "hi", language: "en", kind: "advisory", citations: [], generated_at: 0 }, "r1")];
    const merged = mergeOutbox(entries, [outboxMessage("m1", "alert body")]);
    expect(merged).toHaveLength(2);
    const again = mergeOutbox(merged, [outboxMessage("m1", "alert body")]);
    expect(again).toHaveLength(2);
  });

  it("does not duplicate a reply already shown by the send path", () => {
    const entries = [entryFromReply({ text: "same body", language: "en", kind: "advisory", citations: [], generated_at: 0 }, "r1")];
    const merged = mergeOutbox(entries, [outboxMessage("m2", "same body")]);
    expect(merged).toHaveLength(1);
  });

  it("keeps the voice flag from the outbox", () => {
    const merged = mergeOutbox([], [outboxMessage("m3", "spoken", "voice")]);
    expect(merged[0].kind).toBe("voice");
  });
});

describe("citation rendering", () => {
  it("labels chips with kind and id", () => {
    expect(chipLabel({ kind: "reading", id: "n1:42" })).toBe("reading n1:42");
  });

  it("renders reading details", () => {
    const text = citationDetailText({
      kind: "reading",
      id: "n1:42",
      reading: { node_id: "n1", seq: 42, ts: 0, values: { moisture: 30 } },
    });
    expect(text).toContain("n1 #42");
    expect(text).toContain("moisture 30");
  });

  it("renders passage details with their citation string", () => {
    const text = citationDetailText({
      kind: "passage",
      id: "doc#0",
      passage: { citation: "Manual §Irrigation ¶0", title: "Manual", section: "Irrigation", text: "Keep soil moist." },
    });
    expect(text).toContain("Manual §Irrigation ¶0");
    expect(text).toContain("Keep soil moist.");
  });

  it("renders forecast details per day", () => {
    const text = citationDetailText({
      kind: "forecast",
      id: "31.5,74.3@2026-08-01",
      forecast: {
        forecast_id: "31.5,74.3@2026-08-01",
        issued_at: "2026-08-01",
        entries: [{ date: "2026-08-01", rain_mm: 0, t_min: 24, t_max: 38 }],
      },
    });
    expect(text).toContain("2026-08-01: 0mm");
  });
});

describe("validateMessage", () => {
  it("rejects empty and whitespace-only input", () => {
    expect(validateMessage("")).not.toBeNull();
    expect(validateMessage("   ")).not.toBeNull();
    expect(validateMessage("Should I irrigate?")).toBeNull();
  });
});
