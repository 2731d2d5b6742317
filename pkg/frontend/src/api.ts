// Typed client for the advisory service. The UI talks only to these
// documented endpoints; anything smarter (citation resolution, trend
// flags) happens server-side.

export interface Citation {
  kind: "reading" | "passage" | "forecast";
  id: string;
}

export interface Reply {
  text: string;
  language: string;
  kind: string;
  citations: Citation[];
  generated_at: number;
}

export interface ChatResult {
  reply: Reply | null;
  stage: string;
}

export interface FarmSummary {
  farm_id: string;
  phone: string;
  language: string;
  crops: string[];
  location: [number, number];
  summary_times: string[];
  stage: string;
}

export interface SeriesPoint {
  ts: number;
  value: number;
  node_id: string;
  seq: number;
}

export interface TrendInfo {
  metric: string;
  window_days: number;
  slope_per_day: number;
  intercept: number;
  flag: "rising" | "falling" | "stable";
}

export interface AlertRecord {
  farm_id: string;
  metric: string;
  observed: number;
  band: [number, number];
  severity: string;
  recommendation: string;
  citations: Citation[];
  created_at: number;
}

export interface OutboxMessage {
  message_id: string;
  to_phone: string;
  kind: "text" | "voice";
  body: string;
  language: string;
  citations: Citation[];
  sent_at: number;
}

export interface OnboardRequest {
  phone: string;
  language: string;
  crops: string[];
  location: [number, number];
  summary_times: string[];
  growth_stage?: string;
}

export interface OnboardState {
  phone: string;
  stage: string;
  farm_id: string;
}

export interface CitationDetail {
  kind: string;
  id: string;
  reading?: { node_id: string; seq: number; ts: number; values: Record<string, number> };
  passage?: { citation: string; title: string; section: string; text: string };
  forecast?: {
    forecast_id: string;
    issued_at: string;
    entries: { date: string; rain_mm: number; t_min: number; t_max: number }[];
  };
}

export class ApiError extends Error {
  constructor(public status: number, detail: string) {
    super(`${status}: ${detail}`);
  }
}

type FetchLike = (input: string, init?: RequestInit) => Promise<Response>;

export class ApiClient {
  constructor(
    private baseUrl: string = "",
    private fetchFn: FetchLike = (input, init) => fetch(input, init),
  ) {}

  private async request<T>(path: string, init?: RequestInit): Promise<T> {
    const res = await this.fetchFn(this.baseUrl + path, init);
    if (!res.ok) {
      let detail = res.statusText;
      try {
        const body = await res.json();
        if (body && body.detail) detail = String(body.detail);
      } catch {
        // non-JSON error body; keep the status text
      }
      throw new ApiError(res.status, detail);
    }
    return (await res.json()) as T;
  }

  private post<T>(path: string, body: unknown): Promise<T> {
    return this.request<T>(path, {
      method: "POST",
      headers: { "content-type": "application/json" },
      body: JSON.stringify(body),
    });
  }

  onboard(req: OnboardRequest): Promise<OnboardState> {
    return this.post("/v1/onboard", req);
  }

  onboardState(phone: string): Promise<OnboardState> {
    return this.request(`/v1/onboard?phone=${encodeURIComponent(phone)}`);
  }

  farms(): Promise<FarmSummary[]> {
    return this.request<{ farms: FarmSummary[] }>("/v1/farms").then((d) => d.farms);
  }

  sendChat(farmId: string, body: string, kind: "text" | "voice" = "text"): Promise<ChatResult> {
    return this.post(`/v1/farms/${encodeURIComponent(farmId)}/chat`, { body, kind });
  }

  series(farmId: string, metric: string, from?: number, to?: number): Promise<SeriesPoint[]> {
    const params = new URLSearchParams({ metric });
    if (from !== undefined) params.set("from", String(from));
    if (to !== undefined) params.set("to", String(to));
    return this.request<{ points: SeriesPoint[] }>(
      `/v1/farms/${encodeURIComponent(farmId)}/series?${params}`,
    ).then((d) => d.points);
  }

  latest(farmId: string, metric: string): Promise<{ ts: number; value: number } | null> {
    return this.request<{ latest: { ts: number; value: number } | null }>(
      `/v1/farms/${encodeURIComponent(farmId)}/latest?metric=${encodeURIComponent(metric)}`,
    ).then((d) => d.latest);
  }

  trend(farmId: string, metric: string, days = 7): Promise<TrendInfo> {
    return this.request(
      `/v1/farms/${encodeURIComponent(farmId)}/trend?metric=${encodeURIComponent(metric)}&days=${days}`,
    );
  }

  alerts(farmId: string): Promise<AlertRecord[]> {
    return this.request<{ alerts: AlertRecord[] }>(
      `/v1/farms/${encodeURIComponent(farmId)}/alerts`,
    ).then((d) => d.alerts);
  }

  outbox(phone: string): Promise<OutboxMessage[]> {
    return this.request<{ messages: OutboxMessage[] }>(
      `/v1/outbox?phone=${encodeURIComponent(phone)}`,
    ).then((d) => d.messages);
  }

  resolveCitation(citation: Citation): Promise<CitationDetail> {
    const params = new URLSearchParams({ kind: citation.kind, id: citation.id });
    return this.request(`/v1/citations?${params}`);
  }
}
