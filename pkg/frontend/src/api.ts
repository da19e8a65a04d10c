/**
 * Typed client for the labeling-session HTTP API.
 *
 * The console computes nothing itself: every number rendered comes from
 * one of these calls.
 */

export interface PolicyChoice {
  name: string;
  epsilon?: number;
  class_mode?: string;
  display_epsilon?: number;
}

export interface CreateSessionRequest {
  collection: string;
  budget: number;
  seed?: number;
  policy?: PolicyChoice;
}

export interface QueryPayload {
  query_id: number;
  example_index: number;
  example_id: string;
  num_classes: number;
  display?: string;
}

export interface LeaderboardRow {
  model_index: number;
  model_name: string;
  labeled_accuracy: number | null;
  posterior_mass: number;
  correct_count: number;
}

export interface FinalSelection {
  model_index: number;
  model_name: string;
  labeled_accuracy: number | null;
  posterior_mass: number;
  posterior: number[];
  correct_counts: number[];
}

export interface SessionTranscript {
  session_id: string;
  collection: string;
  policy: Record<string, unknown>;
  budget: number;
  seed: number;
  num_classes: number;
  model_names: string[];
  steps: { query_id: number; example_index: number; example_id: string; label: number }[];
  final_selection: FinalSelection | null;
}

export interface Envelope {
  session_id: string;
  step: number;
  budget: number;
  status: string;
}

export interface SessionView extends Envelope {
  query: QueryPayload | null;
  leaderboard: LeaderboardRow[];
}

export interface QueryResponse extends Envelope {
  query: QueryPayload | null;
}

export interface LeaderboardResponse extends Envelope {
  leaderboard: LeaderboardRow[];
}

export interface FinalizeResponse extends Envelope {
  selection: FinalSelection;
  leaderboard: LeaderboardRow[];
  transcript: SessionTranscript;
}

export interface HealthResponse {
  status: string;
  collections: string[];
}

export interface ApiErrorBody {
  code: string;
  message: string;
  expected_query_id?: number;
}

export class ApiError extends Error {
  constructor(
    public readonly status: number,
    public readonly body: ApiErrorBody,
  ) {
    super(`${body.code}: ${body.message}`);
    this.name = 'ApiError';
  }

  get code(): string {
    return this.body.code;
  }
}

type FetchLike = (url: string, init?: RequestInit) => Promise<Response>;

export class ApiClient {
  constructor(
    private readonly baseUrl: string,
    private readonly fetchFn: FetchLike = (url, init) => fetch(url, init),
  ) {}

  private async request<T>(path: string, init?: RequestInit): Promise<T> {
    let res: Response;
    try {
      res = await this.fetchFn(`${this.baseUrl}${path}`, init);
    } catch (err) {
      throw new ApiError(0, {
        code: 'unreachable',
        message: `service unreachable: ${err instanceof Error ? err.message : String(err)}`,
      });
    }
    const text = await res.text();
    let parsed: unknown = null;
    if (text) {
      try {
        parsed = JSON.parse(text);
      } catch {
        parsed = null;
      }
    }
    if (!res.ok) {
      const body =
        parsed && typeof parsed === 'object' && 'code' in (parsed as object)
          ? (parsed as ApiErrorBody)
          : { code: `http_${res.status}`, message: text || res.statusText };
      throw new ApiError(res.status, body);
    }
    return parsed as T;
  }

  private post<T>(path: string, payload?: unknown): Promise<T> {
    return this.request<T>(path, {
      method: 'POST',
      headers: { 'Content-Type': 'application/json' },
      body: JSON.stringify(payload ?? {}),
    });
  }

  health(): Promise<HealthResponse> {
    return this.request<HealthResponse>('/health');
  }

  createSession(req: CreateSessionRequest): Promise<SessionView> {
    return this.post<SessionView>('/sessions', req);
  }

  getQuery(sessionId: string): Promise<QueryResponse> {
    return this.request<QueryResponse>(`/sessions/${sessionId}/query`);
  }

  postLabel(sessionId: string, queryId: number, label: number): Promise<SessionView> {
    return this.post<SessionView>(`/sessions/${sessionId}/label`, {
      query_id: queryId,
      label,
    });
  }

  getLeaderboard(sessionId: string): Promise<LeaderboardResponse> {
    return this.request<LeaderboardResponse>(`/sessions/${sessionId}/leaderboard`);
  }

  finalize(sessionId: string): Promise<FinalizeResponse> {
    return this.post<FinalizeResponse>(`/sessions/${sessionId}/finalize`);
  }
}
