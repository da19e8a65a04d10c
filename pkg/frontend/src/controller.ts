/**
 * Session state machine behind the console UI.
 *
 * Holds the last server view and exposes the three user actions: start a
 * session, submit a label, finalize. All transitions are driven by service
 * responses; the controller never computes posteriors or accuracies.
 */

import {
  ApiClient,
  ApiError,
  CreateSessionRequest,
  FinalSelection,
  LeaderboardRow,
  QueryPayload,
  SessionTranscript,
  SessionView,
} from './api.js';

export type Phase = 'setup' | 'active' | 'exhausted' | 'finalized';

export interface ConsoleState {
  phase: Phase;
  sessionId: string | null;
  step: number;
  budget: number;
  query: QueryPayload | null;
  leaderboard: LeaderboardRow[];
  selection: FinalSelection | null;
  transcript: SessionTranscript | null;
  /** transient banner, e.g. after a conflict refresh */
  notice: string | null;
  error: string | null;
  busy: boolean;
}

function initialState(): ConsoleState {
  return {
    phase: 'setup',
    sessionId: null,
    step: 0,
    budget: 0,
    query: null,
    leaderboard: [],
    selection: null,
    transcript: null,
    notice: null,
    error: null,
    busy: false,
  };
}

/** Client-side form checks; returns an error message or null. */
export function validateSessionForm(req: CreateSessionRequest): string | null {
  if (!req.collection) {
    return 'pick a collection';
  }
  if (!Number.isInteger(req.budget) || req.budget < 1) {
    return 'budget must be a positive whole number';
  }
  if (req.seed !== undefined && (!Number.isInteger(req.seed) || req.seed < 0)) {
    return 'seed must be a non-negative whole number';
  }
  const eps = req.policy?.epsilon;
  if (eps !== undefined && !(eps > 0 && eps < 1)) {
    return 'epsilon must lie strictly between 0 and 1';
  }
  return null;
}

export class SessionController {
  state: ConsoleState = initialState();

  constructor(
    public api: ApiClient,
    private readonly onChange: (state: ConsoleState) => void = () => {},
  ) {}

  private emit(): void {
    this.onChange(this.state);
  }

  private phaseFor(status: string): Phase {
    if (status === 'finalized') return 'finalized';
    if (status === 'exhausted') return 'exhausted';
    return 'active';
  }

  private applyView(view: SessionView): void {
    this.state.sessionId = view.session_id;
    this.state.step = view.step;
    this.state.budget = view.budget;
    this.state.query = view.query;
    this.state.leaderboard = view.leaderboard;
    this.state.phase = this.phaseFor(view.status);
  }

  async start(req: CreateSessionRequest): Promise<void> {
    if (this.state.busy) return;
    const problem = validateSessionForm(req);
    if (problem) {
      this.state.error = problem;
      this.emit();
      return;
    }
    this.state.busy = true;
    this.state.error = null;
    this.emit();
    try {
      const view = await this.api.createSession(req);
      this.state = initialState();
      this.applyView(view);
    } catch (err) {
      // no session was created; keep the form up with the failure visible
      this.state.error = err instanceof Error ? err.message : String(err);
    }
    this.state.busy = false;
    this.emit();
  }

  /** Refetch query + leaderboard without losing the session. */
  async refresh(): Promise<void> {
    const id = this.state.sessionId;
    if (!id) return;
    const [q, board] = await Promise.all([this.api.getQuery(id), this.api.getLeaderboard(id)]);
    this.state.step = q.step;
    this.state.budget = q.budget;
    this.state.query = q.query;
    this.state.leaderboard = board.leaderboard;
    this.state.phase = this.phaseFor(q.status);
    this.emit();
  }

  async submitLabel(label: number): Promise<void> {
    const { sessionId, query, busy, phase } = this.state;
    if (busy || phase !== 'active' || !sessionId || !query) return;
    this.state.busy = true;
    this.state.notice = null;
    this.state.error = null;
    this.emit();
    try {
      const view = await this.api.postLabel(sessionId, query.query_id, label);
      this.applyView(view);
    } catch (err) {
      if (err instanceof ApiError && err.code === 'stale_query') {
        // another tab answered this query; pick up where the session really is
        await this.refresh();
        this.state.notice = 'query was already answered elsewhere, showing the current one';
      } else if (err instanceof ApiError && err.code === 'budget_exhausted') {
        await this.refresh();
        this.state.notice = 'budget already exhausted';
      } else if (err instanceof ApiError && err.code === 'session_finalized') {
        await this.finalizeSession();
      } else {
        this.state.error = err instanceof Error ? err.message : String(err);
      }
    }
    this.state.busy = false;
    this.emit();
  }

  async finalizeSession(): Promise<void> {
    const id = this.state.sessionId;
    if (!id) return;
    if (this.state.step < 1) {
      this.state.error = 'label at least one example before finalizing';
      this.emit();
      return;
    }
    try {
      const res = await this.api.finalize(id);
      this.state.step = res.step;
      this.state.budget = res.budget;
      this.state.query = null;
      this.state.leaderboard = res.leaderboard;
      this.state.selection = res.selection;
      this.state.transcript = res.transcript;
      this.state.phase = 'finalized';
      this.state.error = null;
    } catch (err) {
      this.state.error = err instanceof Error ? err.message : String(err);
    }
    this.emit();
  }

  /** Pretty JSON body for the transcript download. */
  transcriptJson(): string {
    return JSON.stringify(this.state.transcript, null, 2);
  }

  transcriptFilename(): string {
    return `transcript-${this.state.sessionId ?? 'session'}.json`;
  }
}
