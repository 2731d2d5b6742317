// End-to-end against the real service (started by globalSetup, mock
// model backend): onboard -> activate -> readings -> cited reply within
// 2s -> trend chart with alert marker -> refresh rebuilds everything.
import { describe, expect, it } from "vitest";

import { ApiClient } from "../src/api.js";
import { computeScale, layoutMarkers, layoutSeries } from "../src/chart.js";

const BASE = "http://127.0.0.1:8977";
const PHONE = "+923019990001";

function readingLine(seq: number, ts: number, moisture: number): string {
  return JSON.stringify({
    node_id: "ui-node",
    seq,
    ts,
    values: {
      temperature: 25,
      moisture,
      ph: 6.8,
      ec: 800,
      nitrogen: 120,
      phosphorus: 40,
      potassium: 150,
    },
  });
}

describe("web ui end-to-end", () => {
  it("onboards, chats with citations, and charts the alert marker", async () => {
    const api = new ApiClient(BASE);

    // onboarding form -> pending
    const state = await api.onboard({
      phone: PHONE,
      language: "en",
      crops: ["cotton"],
      location: [31.5, 74.3],
      summary_times: ["07:00"],
    });
    expect(state.stage).toBe("pending_test_message");
    const farmId = state.farm_id;

    // the farmer's first message is the activation reply
    const activation = await api.sendChat(farmId, "ok");
    expect(activation.stage).toBe("active");
    expect((await api.onboardState(PHONE)).stage).toBe("active");

    // wire a node and stream a drying moisture curve; the last reading
    // at 30% triggers the proactive irrigation alert on ingest
    await fetch(`${BASE}/v1/admin/assign_node`, {
      method: "POST",
      headers: { "content-type": "application/json" },
      body: JSON.stringify({ node_id: "ui-node", farm_id: farmId }),
    });
    const now = Math.floor(Date.now() / 1000);
    const lines: string[] = [];
    for (let i = 0; i < 24; i++) {
      const ts = now - (23 - i) * 3600;
      const moisture = 53 - i; // 53 down to 30
      lines.push(readingLine(i + 1, ts, moisture));
    }
    const ingest = await fetch(`${BASE}/v1/ingest`, {
      method: "POST",
      headers: { "content-type": "application/x-ndjson" },
      body: lines.join("\n"),
    });
    expect(ingest.ok).toBe(true);

    // ask the advisor; the cited reply must arrive within 2 s
    const started = Date.now();
    const result = await api.sendChat(farmId, "Should I irrigate today?");
    const elapsed = Date.now() - started;
    expect(elapsed).toBeLessThan(2000);
    expect(result.reply).not.toBeNull();
    expect(result.reply!.text).toContain("30");
    expect(result.reply!.citations.length).toBeGreaterThan(0);
    for (const citation of result.reply!.citations) {
      const detail = await api.resolveCitation(citation);
      expect(detail.kind).toBe(citation.kind);
    }

    // trend chart data: series points plus the alert marker in range
    const points = await api.series(farmId, "moisture");
    expect(points.length).toBe(24);
    const alerts = await api.alerts(farmId);
    expect(alerts.length).toBeGreaterThan(0);
    expect(alerts[0].metric).toBe("moisture");
    const scale = computeScale(points);
    const vertices = layoutSeries(points, scale);
    expect(vertices).toHaveLength(points.length);
    const markers = layoutMarkers(alerts, "moisture", scale);
    expect(markers.length).toBeGreaterThan(0);

    // the outbox shows the voice alert plus our replies
    const outbox = await api.outbox(PHONE);
    expect(outbox.some((m) => m.kind === "voice")).toBe(true);

    // "refresh": a brand-new client rebuilds the same view from the API
    const fresh = new ApiClient(BASE);
    const farms = await fresh.farms();
    const mine = farms.find((f) => f.farm_id === farmId);
    expect(mine?.stage).toBe("active");
    expect((await fresh.series(farmId, "moisture")).length).toBe(points.length);
    expect((await fresh.alerts(farmId)).length).toBe(alerts.length);
    expect((await fresh.outbox(PHONE)).length).toBe(outbox.length);
  });
});
