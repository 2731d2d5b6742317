// Chat panel model: message list merging (local sends + polled outbox)
// and citation chip labels. Kept DOM-free so vitest covers it directly.

import type { Citation, CitationDetail, OutboxMessage, Reply } from "./api.js";

export interface ChatEntry {
  key: string;
  direction: "inbound" | "outbound";
  body: string;
  kind: "text" | "voice";
  language: string;
  citations: Citation[];
}

export function entryFromReply(reply: Reply, key: string): ChatEntry {
  return {
    key,
    direction: "outbound",
    body: reply.text,
    kind: "text",
    language: reply.language,
    citations: reply.citations,
  };
}

export function entryFromOutbox(message: OutboxMessage): ChatEntry {
  return {
    key: message.message_id,
    direction: "outbound",
    body: message.body,
    kind: message.kind,
    language: message.language,
    citations: message.citations ?? [],
  };
}

/** Merge newly polled outbox messages into the list, deduplicating by
 * message id so a poll never repeats what the send path already showed. */
export function mergeOutbox(entries: ChatEntry[], outbox: OutboxMessage[]): ChatEntry[] {
  const seenBodies = new Set(entries.filter((e) => e.direction === "outbound").map((e) => e.body));
  const seenKeys = new Set(entries.map((e) => e.key));
  const merged = [...entries];
  for (const message of outbox) {
    if (seenKeys.has(message.message_id) || seenBodies.has(message.body)) continue;
    merged.push(entryFromOutbox(message));
    seenKeys.add(message.message_id);
  }
  return merged;
}

export function chipLabel(citation: Citation): string {
  return `${citation.kind} ${citation.id}`;
}

/** One-paragraph expansion text for a resolved citation chip. */
export function citationDetailText(detail: CitationDetail): string {
  if (detail.reading) {
    const values = Object.entries(detail.reading.values)
      .map(([metric, value]) => `${metric} ${value}`)
      .join(", ");
    return `Reading ${detail.reading.node_id} #${detail.reading.seq}: ${values}`;
  }
  if (detail.passage) {
    return `${detail.passage.citation} — ${detail.passage.text}`;
  }
  if (detail.forecast) {
    const days = detail.forecast.entries
      .map((e) => `${e.date}: ${e.rain_mm}mm, ${e.t_min}-${e.t_max}°C`)
      .join("; ");
    return `Forecast ${detail.forecast.issued_at}: ${days}`;
  }
  return `${detail.kind} ${detail.id}`;
}

export function validateMessage(body: string): string | null {
  return body.trim().length === 0 ? "Message cannot be empty" : null;
}
