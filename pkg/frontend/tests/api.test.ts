import { describe, expect, it } from "vitest";

import { ApiClient, ApiError } from "../src/api.js";

interface Recorded {
  url: string;
  init?: RequestInit;
}

function stubClient(status: number, body: unknown): { api: ApiClient; calls: Recorded[] } {
  const calls: Recorded[] = [];
  const api = new ApiClient("http://svc", async (url, init) => {
    calls.push({ url, init });
    return new Response(JSON.stringify(body), {
      status,
      headers: { "content-type": "application/json" },
    });
  });
  return { api, calls };
}

describe("ApiClient", () => {
  it("fetches and unwraps the farm list", async () => {
    const { api, calls } = stubClient(200, { farms: [{ farm_id: "farm-0001" }] });
    const farms = await api.farms();
    expect(farms).toHaveLength(1);
    expect(calls[0].url).toBe("http://svc/v1/farms");
  });

  it("posts chat messages with body and kind", async () => {
    const { api, calls } = stubClient(200, { reply: null, stage: "active" });
    await api.sendChat("farm-0001", "Should I irrigate today?", "voice");
    expect(calls[0].url).toBe("http://svc/v1/farms/farm-0001/chat");
    expect(calls[0].init?.method).toBe("POST");
    expect(JSON.parse(String(calls[0].init?.body))).toEqual({
      body: "Should I irrigate today?",
      kind: "voice",
    });
  });

  it("encodes series window params", async () => {
    const { api, calls } = stubClient(200, { points: [] });
    await api.series("farm-0001", "moisture", 100, 200);
    expect(calls[0].url).toContain("metric=moisture");
    expect(calls[0].url).toContain("from=100");
    expect(calls[0].url).toContain("to=200");
  });

  it("surfaces the service's error detail", async () => {
    const { api } = stubClient(404, { detail: "unknown farm" });
    await expect(api.alerts("ghost")).rejects.toThrowError(ApiError);
    await expect(api.alerts("ghost")).rejects.toThrow("404: unknown farm");
  });

  it("resolves citations by kind and id", async () => {
    const { api, calls } = stubClient(200, { kind: "reading", id: "n1:7" });
    await api.resolveCitation({ kind: "reading", id: "n1:7" });
    expect(calls[0].url).toBe("http://svc/v1/citations?kind=reading&id=n1%3A7");
  });
});
