import type {
  ApiErrorBody,
  FeedbackResponse,
  MoveOutcome,
  SessionView,
} from "./types.js";

export interface TransportResponse {
  status: number;
  body: unknown;
}

// Injectable so tests can replay recorded service exchanges.
export interface Transport {
  request(method: string, path: string, body?: unknown): Promise<TransportResponse>;
}

export class HttpTransport implements Transport {
  constructor(private readonly baseUrl: string = "") {}

  async request(method: string, path: string, body?: unknown): Promise<TransportResponse> {
    const response = await fetch(this.baseUrl + path, {
      method,
      headers: body === undefined ? undefined : { "Content-Type": "application/json" },
      body: body === undefined ? undefined : JSON.stringify(body),
    });
    return { status: response.status, body: await response.json() };
  }
}

export class ApiError extends Error {
  constructor(
    readonly status: number,
    readonly payload: ApiErrorBody,
  ) {
    super(`${payload.error}: ${payload.detail}`);
  }
}

function unwrap<T>(response: TransportResponse): T {
  if (response.status >= 400) {
    const body = response.body as Partial<ApiErrorBody> | null;
    throw new ApiError(response.status, {
      error: body?.error ?? "RequestFailed",
      detail: body?.detail ?? `HTTP ${response.status}`,
    });
  }
  return response.body as T;
}

export class ApiClient {
  constructor(private readonly transport: Transport) {}

  async createSession(condition: string, seed?: number): Promise<SessionView> {
    const body: Record<string, unknown> = { condition };
    if (seed !== undefined) body.seed = seed;
    return unwrap(await this.transport.request("POST", "/sessions", body));
  }

  async getSession(sessionId: string): Promise<SessionView> {
    return unwrap(await this.transport.request("GET", `/sessions/${sessionId}`));
  }

  async submitMove(sessionId: string, from: number, to: number): Promise<MoveOutcome> {
    return unwrap(
      await this.transport.request("POST", `/sessions/${sessionId}/moves`, { from, to }),
    );
  }

  async requestFeedback(sessionId: string): Promise<FeedbackResponse> {
    return unwrap(await this.transport.request("POST", `/sessions/${sessionId}/feedback`));
  }

  async advance(sessionId: string): Promise<SessionView> {
    return unwrap(await this.transport.request("POST", `/sessions/${sessionId}/advance`));
  }
}
