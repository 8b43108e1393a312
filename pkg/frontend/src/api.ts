/**
 * Typed HTTP client for the toneshift prediction service.
 *
 * The composer talks to the service exclusively through these two
 * endpoints; there is no other coupling to the backend.
 */

export interface ThreadMessage {
  text: string;
  author: string;
  created_utc: number;
}

export interface Draft {
  text: string;
}

export interface PredictRequest {
  messages: ThreadMessage[];
  post_author: string;
  draft?: Draft;
  draft_as_author?: boolean;
}

export interface PredictResponse {
  predicted_emt: number;
  per_message_emt: number[];
  model_id: string;
  latency_ms: number;
  truncated: boolean;
}

export interface HealthResponse {
  status: "ok" | "degraded";
  model_id: string | null;
  lexicon_checksum: string;
  provider_id: string | null;
  uptime_s: number;
  reason?: string;
}

/** Minimal fetch shape so tests can inject a mock transport. */
export type FetchLike = (
  url: string,
  init?: { method?: string; headers?: Record<string, string>; body?: string },
) => Promise<{ ok: boolean; status: number; json(): Promise<unknown> }>;

export class ServiceError extends Error {
  constructor(
    readonly status: number,
    message: string,
  ) {
    super(message);
    this.name = "ServiceError";
  }
}

export class ToneServiceClient {
  constructor(
    private readonly baseUrl: string,
    private readonly fetchFn: FetchLike = fetch as unknown as FetchLike,
  ) {}

  async predict(request: PredictRequest): Promise<PredictResponse> {
    const res = await this.fetchFn(`${this.baseUrl}/v1/predict`, {
      method: "POST",
      headers: { "content-type": "application/json" },
      body: JSON.stringify(request),
    });
    if (!res.ok) {
      throw new ServiceError(res.status, `predict failed with status ${res.status}`);
    }
    return (await res.json()) as PredictResponse;
  }

  async health(): Promise<HealthResponse> {
    const res = await this.fetchFn(`${this.baseUrl}/v1/health`);
    if (!res.ok) {
      throw new ServiceError(res.status, `health failed with status ${res.status}`);
    }
    return (await res.json()) as HealthResponse;
  }
}
