/** Console state: server-authoritative, one in-flight mutation at a time.
 *
 * The timeline mirrors the server's session history exactly; every number
 * shown to the analyst came back from an acknowledged request.  Mutations
 * queue client-side so what-if probes can never interleave with real ball
 * entry.
 */

import {
  ApiClient,
  ApiError,
  BallEntry,
  CheckpointInfo,
  MatchContext,
  ProbabilityPoint,
} from "./api.js";

export type ConnectionStatus = "idle" | "ready" | "busy" | "disconnected";

export interface TimelinePoint extends ProbabilityPoint {
  /** a wicket fell on this ball (derived from cumulative counts) */
  wicket: boolean;
}

export interface StartForm {
  checkpointId: string;
  battingTeam: string;
  bowlingTeam: string;
  venue: string;
  targetScore: number | null;
  fiWickets: number | null;
  tossWinner: string;
  tossDecision: string;
}

export interface ConsoleState {
  sessionId: string | null;
  checkpoint: CheckpointInfo | null;
  context: MatchContext | null;
  timeline: TimelinePoint[];
  ghost: ProbabilityPoint | null;
  pendingBuffered: boolean;
  status: ConnectionStatus;
  lastError: string | null;
  sessionFull: boolean;
}

export function validateStartForm(form: StartForm, checkpoint: CheckpointInfo): string[] {
  const problems: string[] = [];
  if (!form.battingTeam) problems.push("batting team is required");
  if (!form.bowlingTeam) problems.push("bowling team is required");
  if (form.battingTeam && form.battingTeam === form.bowlingTeam) {
    problems.push("teams must differ");
  }
  if (checkpoint.aug_target && form.targetScore == null) {
    problems.push("this checkpoint needs the target score");
  }
  if (checkpoint.aug_wickets && form.fiWickets == null) {
    problems.push("this checkpoint needs the first-innings wickets");
  }
  return problems;
}

function annotate(history: ProbabilityPoint[]): TimelinePoint[] {
  let prevWickets = 0;
  return history.map((p) => {
    const wicket = p.cum_wickets > prevWickets;
    prevWickets = p.cum_wickets;
    return { ...p, wicket };
  });
}

export class ConsoleStore {
  readonly state: ConsoleState = {
    sessionId: null,
    checkpoint: null,
    context: null,
    timeline: [],
    ghost: null,
    pendingBuffered: false,
    status: "idle",
    lastError: null,
    sessionFull: false,
  };

  private queue: Promise<unknown> = Promise.resolve();
  private listeners: Array<() => void> = [];
  private overCounter = { over: 0, legalInOver: 0, deliveriesInOver: 0 };

  constructor(private readonly client: ApiClient) {}

  subscribe(fn: () => void): void {
    this.listeners.push(fn);
  }

  private emit(): void {
    for (const fn of this.listeners) fn();
  }

  /** Serialize mutations: at most one request in flight. */
  private enqueue<T>(work: () => Promise<T>): Promise<T> {
    const next = this.queue.then(work, work);
    this.queue = next.catch(() => undefined);
    return next;
  }

  private fail(err: unknown): never {
    if (err instanceof ApiError) {
      this.state.lastError = `${err.errorCode}: ${err.message}`;
      if (err.errorCode === "SessionFull") this.state.sessionFull = true;
    } else {
      this.state.lastError = String(err);
      this.state.status = "disconnected";
    }
    this.emit();
    throw err;
  }

  async startMatch(form: StartForm, checkpoint: CheckpointInfo): Promise<void> {
    const problems = validateStartForm(form, checkpoint);
    if (problems.length > 0) {
      // invalid form: no request leaves the console
      this.state.lastError = problems.join("; ");
      this.emit();
      throw new Error(this.state.lastError ?? "invalid form");
    }
    const context: MatchContext = {
      batting_team: form.battingTeam,
      bowling_team: form.bowlingTeam,
      venue: form.venue,
      toss_winner: form.tossWinner,
      toss_decision: form.tossDecision,
      target_score: form.targetScore,
      fi_wickets: form.fiWickets,
    };
    return this.enqueue(async () => {
      try {
        const sessionId = await this.client.createSession(checkpoint.id, context);
        this.state.sessionId = sessionId;
        this.state.checkpoint = checkpoint;
        this.state.context = context;
        this.state.timeline = [];
        this.state.ghost = null;
        this.state.pendingBuffered = false;
        this.state.sessionFull = false;
        this.state.status = "ready";
        this.state.lastError = null;
        this.overCounter = { over: 0, legalInOver: 0, deliveriesInOver: 0 };
        this.emit();
      } catch (err) {
        this.fail(err);
      }
    });
  }

  /** Suggested over.ball numbers for the next delivery entry. */
  nextBallNumbers(): { over: number; ballInOver: number } {
    return {
      over: this.overCounter.over,
      ballInOver: this.overCounter.deliveriesInOver + 1,
    };
  }

  private advanceCounter(legal: boolean): void {
    this.overCounter.deliveriesInOver += 1;
    if (legal) {
      this.overCounter.legalInOver += 1;
      if (this.overCounter.legalInOver >= 6) {
        this.overCounter.over += 1;
        this.overCounter.legalInOver = 0;
        this.overCounter.deliveriesInOver = 0;
      }
    }
  }

  recordBall(ball: BallEntry): Promise<void> {
    return this.enqueue(async () => {
      if (!this.state.sessionId) throw new Error("no active session");
      try {
        const result = await this.client.pushBall(this.state.sessionId, ball);
        if (result.buffered) {
          this.state.pendingBuffered = true;
          this.advanceCounter(false);
        } else if (result.point) {
          this.state.pendingBuffered = false;
          this.state.timeline = annotate([
            ...this.state.timeline,
            result.point,
          ].map(({ t, p_win, cum_runs, cum_wickets }) => ({ t, p_win, cum_runs, cum_wickets })));
          this.advanceCounter(true);
        }
        this.state.ghost = null;
        this.emit();
      } catch (err) {
        this.fail(err);
      }
    });
  }

  /** Push a hypothetical ball, show its probability as a ghost point, then
   * undo it; the committed timeline is untouched. */
  whatIf(ball: BallEntry): Promise<ProbabilityPoint | null> {
    return this.enqueue(async () => {
      if (!this.state.sessionId) throw new Error("no active session");
      if (this.state.sessionFull) throw new Error("session is full");
      try {
        const result = await this.client.pushBall(this.state.sessionId, ball);
        this.state.ghost = result.point;
        await this.client.undo(this.state.sessionId);
        this.emit();
        return result.point;
      } catch (err) {
        this.fail(err);
      }
    });
  }

  undoBall(): Promise<void> {
    return this.enqueue(async () => {
      if (!this.state.sessionId) throw new Error("no active session");
      try {
        await this.client.undo(this.state.sessionId);
        await this.refreshNow();
      } catch (err) {
        this.fail(err);
      }
    });
  }

  /** Re-fetch the authoritative session history. */
  refresh(): Promise<void> {
    return this.enqueue(() => this.refreshNow());
  }

  private async refreshNow(): Promise<void> {
    if (!this.state.sessionId) return;
    try {
      const view = await this.client.getSession(this.state.sessionId);
      this.state.timeline = annotate(view.history);
      this.state.status = "ready";
      this.emit();
    } catch (err) {
      this.fail(err);
    }
  }
}
