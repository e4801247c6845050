import { ApiError, liveApi, type Api } from "./api.js";
import type { Final, Round, SessionView } from "./types.js";

function viewFrom(
  sessionId: string,
  rounds: Round[],
  finished: boolean,
  final: Final | null,
): SessionView {
  return {
    sessionId,
    rounds,
    status: finished ? "finished" : "awaiting_answer",
    final,
  };
}

/**
 * Drives one session against the HTTP API.
 *
 * At most one request is in flight at any time: a second answer while the
 * first is pending is dropped on the client, so a double-click can never
 * produce two rounds. The server's per-session lock backs this up with 409.
 */
export class SessionController {
  view: SessionView | null = null;
  private inFlight = false;

  constructor(private readonly api: Api = liveApi) {}

  get busy(): boolean {
    return this.inFlight;
  }

  async start(symptoms: string[], tau: number): Promise<SessionView> {
    if (this.inFlight) throw new Error("a request is already in flight");
    this.inFlight = true;
    try {
      const res = await this.api.createSession(symptoms, tau);
      this.view = viewFrom(res.session_id, [res.round], res.finished, res.final);
      return this.view;
    } finally {
      this.inFlight = false;
    }
  }

  /** Resolves to null when the click must be ignored (locked or finished). */
  async answer(value: "yes" | "no"): Promise<SessionView | null> {
    if (this.inFlight || !this.view || this.view.status === "finished") {
      return null;
    }
    this.inFlight = true;
    try {
      const res = await this.api.answerSession(this.view.sessionId, value);
      this.view = viewFrom(
        this.view.sessionId,
        [...this.view.rounds, res.round],
        res.finished,
        res.final,
      );
      return this.view;
    } catch (err) {
      if (err instanceof ApiError && err.status === 409) {
        // someone else won the race; re-read the authoritative state
        return this.refreshLocked();
      }
      throw err;
    } finally {
      this.inFlight = false;
    }
  }

  private async refreshLocked(): Promise<SessionView | null> {
    if (!this.view) return null;
    const snap = await this.api.fetchSession(this.view.sessionId);
    this.view = viewFrom(snap.session_id, snap.rounds, snap.finished, snap.final);
    return this.view;
  }
}
