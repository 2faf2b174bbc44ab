/**
 * Typed client for the sleepql service HTTP API.
 *
 * Mirrors the wire formats documented in docs/formats.md. The client
 * performs no interpretation of the data it carries: numbers, formatted
 * tokens, and delta percentages arrive pre-computed from the service and
 * are passed through untouched.
 */

// ---------------------------------------------------------------------------
// Payload types

/** One result cell. Timestamps and timespans arrive in tagged envelopes. */
export type Cell =
  | number
  | string
  | boolean
  | null
  | { $ts: string }
  | { $span_us: number };

export interface ResultColumn {
  name: string;
  type: string;
}

export interface QueryResult {
  columns: ResultColumn[];
  rows: Cell[][];
  row_count: number;
  provenance: string;
  warnings: string[];
}

/** A canonical query plus the result it produced — one receipt. */
export interface Evidence {
  plan: string;
  result: QueryResult;
}

export interface NumberClaim {
  token: string;
  transform: string;
  sources: (string | number)[][];
}

export interface TimeWindowDoc {
  start: string;
  end: string;
  label: string;
  timezone: string;
}

export interface DataRequestDoc {
  metric: string;
  aggregation: string;
  primary_window: TimeWindowDoc;
  comparison_window: TimeWindowDoc | null;
  comparison_mode: string;
  user_id: string;
}

export type ResponseKind =
  | "chat"
  | "simple"
  | "comparative"
  | "null_data"
  | "unsupported"
  | "clarification";

export interface GroundedResponse {
  kind: ResponseKind;
  text: string;
  evidence: Evidence[];
  number_provenance: NumberClaim[];
  request: DataRequestDoc | null;
  trace: string[];
}

export interface HistoryEntry {
  role: "user" | "agent";
  text: string;
  kind: ResponseKind | null;
  timestamp: string;
  response?: GroundedResponse;
}

export interface SessionInfo {
  session_id: string;
  user_id: string;
  timezone: string;
  created_at: string;
  history?: HistoryEntry[];
}

export interface ChatReply {
  session_id: string;
  response: GroundedResponse;
}

export interface NotificationRecord {
  user_id: string;
  date: string;
  kind: "deviation" | "sleep_debt";
  metric: string;
  message: string;
  observed: number;
  baseline: number | null;
  delta_ratio: number | null;
  delta_percent: string;
  far_above: boolean;
  evidence: Evidence[];
}

// ---------------------------------------------------------------------------
// Errors

/**
 * Any failed exchange with the service. `status` is the HTTP status, or 0
 * when the request never completed (network failure, service down).
 */
export class ServiceError extends Error {
  constructor(
    readonly status: number,
    message: string,
  ) {
    super(message);
    this.name = "ServiceError";
  }
}

// ---------------------------------------------------------------------------
// Client

/** The service surface the UI consumes; implemented by SleepqlClient. */
export interface ApiClient {
  createSession(userId: string, timezone?: string): Promise<SessionInfo>;
  getSession(sessionId: string): Promise<SessionInfo>;
  chat(sessionId: string, text: string): Promise<ChatReply>;
  notifications(userId: string, since?: string): Promise<NotificationRecord[]>;
}

async function parseError(response: Response): Promise<ServiceError> {
  let message = `${response.status} ${response.statusText}`;
  try {
    const body = (await response.json()) as { error?: string };
    if (body && typeof body.error === "string") message = body.error;
  } catch {
    // non-JSON error body; keep the status line
  }
  return new ServiceError(response.status, message);
}

export class SleepqlClient implements ApiClient {
  /**
   * @param base API origin, e.g. "http://127.0.0.1:8777". Empty string
   *             targets the page's own origin (the service can host the
   *             built UI itself).
   */
  constructor(
    readonly base: string = "",
    private readonly fetchFn: typeof fetch = fetch,
  ) {}

  private async request<T>(path: string, init?: RequestInit): Promise<T> {
    let response: Response;
    try {
      response = await this.fetchFn(this.base + path, init);
    } catch (cause) {
      throw new ServiceError(0, `service unreachable: ${String(cause)}`);
    }
    if (!response.ok) throw await parseError(response);
    return (await response.json()) as T;
  }

  private post<T>(path: string, body: unknown): Promise<T> {
    return this.request<T>(path, {
      method: "POST",
      headers: { "Content-Type": "application/json" },
      body: JSON.stringify(body),
    });
  }

  createSession(userId: string, timezone?: string): Promise<SessionInfo> {
    return this.post<SessionInfo>("/sessions", {
      user_id: userId,
      ...(timezone ? { timezone } : {}),
    });
  }

  /** Full session descriptor including the stored transcript. */
  getSession(sessionId: string): Promise<SessionInfo> {
    return this.request<SessionInfo>(
      `/sessions/${encodeURIComponent(sessionId)}`,
    );
  }

  chat(sessionId: string, text: string): Promise<ChatReply> {
    return this.post<ChatReply>("/chat", { session_id: sessionId, text });
  }

  async notifications(
    userId: string,
    since?: string,
  ): Promise<NotificationRecord[]> {
    const query = new URLSearchParams({ user_id: userId });
    if (since) query.set("since", since);
    const body = await this.request<{ notifications: NotificationRecord[] }>(
      `/notifications?${query.toString()}`,
    );
    return body.notifications;
  }

  health(): Promise<{ status: string }> {
    return this.request<{ status: string }>("/healthz");
  }
}
