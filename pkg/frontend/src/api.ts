// Thin typed client for the service HTTP API. Every number shown in the UI
// comes out of these responses; the UI never invents data.

import type {
  ApplianceInfo,
  Bucket,
  HealthInfo,
  Recommendation,
  Verdict,
} from "./types.js";

export class ApiError extends Error {
  constructor(public status: number, message: string) {
    super(message);
  }
}

export interface FeedbackResult {
  ok: boolean;
  status: number; // 204 applied, 409 already resolved, 404 unknown
}

export class ApiClient {
  constructor(
    private baseUrl: string,
    private fetchImpl: typeof fetch = fetch,
  ) {}

  private async getJson<T>(path: string): Promise<T> {
    const resp = await this.fetchImpl(this.baseUrl + path);
    if (!resp.ok) {
      throw new ApiError(resp.status, `GET ${path} -> ${resp.status}`);
    }
    return (await resp.json()) as T;
  }

  getAppliances(): Promise<ApplianceInfo[]> {
    return this.getJson("/api/appliances");
  }

  getConsumption(applianceId: string, from: number, to: number): Promise<Bucket[]> {
    const q = new URLSearchParams({
      appliance: applianceId,
      from: String(Math.floor(from)),
      to: String(Math.ceil(to)),
    });
    return this.getJson(`/api/consumption?${q}`);
  }

  getEnvironment(zone: string, from: number, to: number): Promise<Bucket[]> {
    const q = new URLSearchParams({
      zone,
      from: String(Math.floor(from)),
      to: String(Math.ceil(to)),
    });
    return this.getJson(`/api/environment?${q}`);
  }

  getRecommendations(status?: string): Promise<Recommendation[]> {
    const q = status ? `?status=${encodeURIComponent(status)}` : "";
    return this.getJson(`/api/recommendations${q}`);
  }

  getHealth(): Promise<HealthInfo> {
    return this.getJson("/api/health");
  }

  async postFeedback(recId: string, verdict: Verdict): Promise<FeedbackResult> {
    const resp = await this.fetchImpl(
      `${this.baseUrl}/api/recommendations/${encodeURIComponent(recId)}/feedback`,
      {
        method: "POST",
        headers: { "Content-Type": "application/json" },
        body: JSON.stringify({ verdict }),
      },
    );
    return { ok: resp.status === 204, status: resp.status };
  }

  async postCommand(applianceId: string, state: "ON" | "OFF"): Promise<boolean> {
    const resp = await this.fetchImpl(
      `${this.baseUrl}/api/appliances/${encodeURIComponent(applianceId)}/command`,
      {
        method: "POST",
        headers: { "Content-Type": "application/json" },
        body: JSON.stringify({ state }),
      },
    );
    return resp.status === 202;
  }
}
