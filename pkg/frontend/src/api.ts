/** Typed client for the live inference HTTP API.
 *
 * Every mutation returns the server's own numbers; the console never
 * computes probabilities locally.
 */

export interface ProbabilityPoint {
  t: number;
  p_win: number;
  cum_runs: number;
  cum_wickets: number;
}

export interface CheckpointInfo {
  id: string;
  variant: string;
  aug_prematch: boolean;
  aug_target: boolean;
  aug_wickets: boolean;
  layout_version: number;
}

export interface MatchContext {
  batting_team: string;
  bowling_team: string;
  venue?: string;
  season?: string;
  gender?: string;
  toss_winner?: string;
  toss_decision?: string;
  target_score?: number | null;
  fi_wickets?: number | null;
  prematch_prob?: number | null;
}

export interface BallEntry {
  over: number;
  ball_in_over: number;
  batting_team: string;
  batsman: string;
  non_striker: string;
  bowler: string;
  runs_off_bat: number;
  extras: number;
  extras_kind: string;
  wicket: number;
}

export interface PushResult {
  point: ProbabilityPoint | null;
  buffered: boolean;
}

export interface SessionView {
  context: MatchContext;
  t: number;
  history: ProbabilityPoint[];
}

/** Error body shape used by every non-2xx API response. */
export class ApiError extends Error {
  constructor(
    public readonly errorCode: string,
    message: string,
    public readonly status: number,
  ) {
    super(message);
  }
}

async function parseError(resp: Response): Promise<ApiError> {
  let code = "UnknownError";
  let message = `HTTP ${resp.status}`;
  try {
    const body = await resp.json();
    if (body && typeof body.error_code === "string") {
      code = body.error_code;
      message = body.message ?? message;
    }
  } catch {
    // non-JSON error body; keep the defaults
  }
  return new ApiError(code, message, resp.status);
}

export class ApiClient {
  constructor(private readonly baseUrl: string, private readonly fetchFn: typeof fetch = fetch) {}

  private async request<T>(method: string, path: string, body?: unknown): Promise<T> {
    const resp = await this.fetchFn(`${this.baseUrl}${path}`, {
      method,
      headers: body === undefined ? undefined : { "Content-Type": "application/json" },
      body: body === undefined ? undefined : JSON.stringify(body),
    });
    if (!resp.ok) {
      throw await parseError(resp);
    }
    if (resp.status === 204) {
      return undefined as T;
    }
    return (await resp.json()) as T;
  }

  health(): Promise<{ status: string }> {
    return this.request("GET", "/healthz");
  }

  listCheckpoints(): Promise<CheckpointInfo[]> {
    return this.request("GET", "/v1/checkpoints");
  }

  async createSession(checkpointId: string, context: MatchContext): Promise<string> {
    const body = await this.request<{ session_id: string }>("POST", "/v1/sessions", {
      checkpoint_id: checkpointId,
      context,
    });
    return body.session_id;
  }

  pushBall(sessionId: string, ball: BallEntry): Promise<PushResult> {
    return this.request("POST", `/v1/sessions/${sessionId}/balls`, ball);
  }

  undo(sessionId: string): Promise<{ t: number; p_win: number | null }> {
    return this.request("POST", `/v1/sessions/${sessionId}/undo`);
  }

  getSession(sessionId: string): Promise<SessionView> {
    return this.request("GET", `/v1/sessions/${sessionId}`);
  }

  deleteSession(sessionId: string): Promise<void> {
    return this.request("DELETE", `/v1/sessions/${sessionId}`);
  }
}
