/** Thin typed client over the monitor-service HTTP API. */

import type {
  ContextBody,
  EvolutionBody,
  EventDraft,
  MetaEventDraft,
  MetaEventView,
  PanelsBody,
  RankingsBody,
  SessionEntryOut,
  TriageRecordView,
} from "./types.js";

export type FetchLike = (input: string, init?: RequestInit) => Promise<Response>;

export class ApiError extends Error {
  readonly status: number;
  readonly detail: string;
  readonly position?: number;

  constructor(status: number, detail: string, position?: number) {
    super(detail);
    this.status = status;
    this.detail = detail;
    this.position = position;
  }
}

export class ApiClient {
  private readonly base: string;
  private readonly fetchFn: FetchLike;

  constructor(base: string, fetchFn?: FetchLike) {
    this.base = base.replace(/\/$/, "");
    const impl = fetchFn ?? (globalThis.fetch as FetchLike);
    this.fetchFn = (input, init) => impl(input, init);
  }

  private async request<T>(path: string, init?: RequestInit): Promise<T> {
    const response = await this.fetchFn(`${this.base}${path}`, init);
    const body = await response.json().catch(() => ({}));
    if (!response.ok) {
      const detail =
        typeof body?.detail === "string" ? body.detail : JSON.stringify(body);
      throw new ApiError(response.status, detail, body?.position);
    }
    return body as T;
  }

  private post<T>(path: string, payload: unknown, method = "POST"): Promise<T> {
    return this.request<T>(path, {
      method,
      headers: { "content-type": "application/json" },
      body: JSON.stringify(payload),
    });
  }

  rankings(asOf: string, k?: number, filter?: string): Promise<RankingsBody> {
    const params = new URLSearchParams({ as_of: asOf });
    if (k !== undefined) params.set("k", String(k));
    if (filter) params.set("filter", filter);
    return this.request(`/rankings?${params}`);
  }

  context(key: string, asOf: string): Promise<ContextBody> {
    return this.request(
      `/streams/${encodeURIComponent(key)}/context?as_of=${asOf}`,
    );
  }

  evolution(key: string, asOf: string): Promise<EvolutionBody> {
    return this.request(
      `/streams/${encodeURIComponent(key)}/evolution?as_of=${asOf}`,
    );
  }

  panels(asOf: string): Promise<PanelsBody> {
    return this.request(`/panels?as_of=${asOf}`);
  }

  postEvent(draft: EventDraft): Promise<TriageRecordView> {
    return this.post("/events", draft);
  }

  patchEvent(id: number, patch: Record<string, unknown>): Promise<TriageRecordView> {
    return this.post(`/events/${id}`, patch, "PATCH");
  }

  postMetaEvent(draft: MetaEventDraft): Promise<MetaEventView> {
    return this.post("/meta-events", draft);
  }

  postSessionLog(
    sessionId: string,
    reviewer: string,
    entries: SessionEntryOut[],
  ): Promise<{ session_id: string; imported: number }> {
    return this.post("/sessions/log", {
      session_id: sessionId,
      reviewer,
      entries,
    });
  }

  kpis(from: string, to: string): Promise<Record<string, unknown>> {
    return this.request(`/kpis?from=${from}&to=${to}`);
  }
}
